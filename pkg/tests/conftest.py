"""Shared fixtures: the stored PR payloads, page fixtures, and wired clients."""

from pathlib import Path

import pytest

from ailp.github import GitHubClient
from ailp.metrics import HashEmbeddingProvider
from ailp.pages import PageFetcher, PageFixtures

DATA_DIR = Path(__file__).parent / "data"
FIXTURE_DIR = DATA_DIR / "fixtures"


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return FIXTURE_DIR


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture()
def github_client() -> GitHubClient:
    return GitHubClient(fixture_dir=FIXTURE_DIR / "prs")


@pytest.fixture()
def page_fetcher() -> PageFetcher:
    return PageFetcher(fixtures=PageFixtures(FIXTURE_DIR / "pages"))


@pytest.fixture(scope="session")
def provider() -> HashEmbeddingProvider:
    return HashEmbeddingProvider()
