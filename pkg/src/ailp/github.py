"""GitHub ingestion: PR records, repository curation, and link harvesting.

The client runs in one of two modes. Live mode talks to the REST API with
pagination, retries, and rate-limit awareness. Fixture mode reads stored
JSON payloads (one file per PR, mirroring the live field names) so the
whole pipeline is reproducible with no network.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

import httpx

from ailp.links import (
    LinkClassificationError,
    LinkOccurrence,
    Location,
    classify_link,
    extract_links,
    filter_by_label_length,
)
from ailp.util import EPOCH, parse_utc, utc_now

API_BASE_URL = "https://api.github.com"
_PAGE_SIZE = 100
_RETRY_ATTEMPTS = 3
_RETRY_BASE_DELAY = 1.0


class GitHubError(Exception):
    """Base class for GitHub client failures."""


class PrNotFoundError(GitHubError):
    pass


class RateLimitedError(GitHubError):
    def __init__(self, message: str, retry_after: float) -> None:
        super().__init__(message)
        self.retry_after = retry_after


class GitHubTransportError(GitHubError):
    pass


@dataclass(frozen=True)
class PrComment:
    container_id: str
    author: str
    body: str


@dataclass(frozen=True)
class ReviewComment:
    container_id: str
    author: str
    body: str
    file_path: str


@dataclass(frozen=True)
class PrRecord:
    repo_full_name: str
    repo_description: str
    pr_number: int
    title: str
    description_body: str
    comments: tuple[PrComment, ...]
    review_comments: tuple[ReviewComment, ...]
    fetched_at: datetime

    def __post_init__(self) -> None:
        if self.pr_number < 1:
            raise ValueError("pr_number must be >= 1")
        ids = [c.container_id for c in self.comments] + [
            r.container_id for r in self.review_comments
        ]
        if len(ids) != len(set(ids)):
            raise ValueError("container_ids must be unique across comment lists")


@dataclass(frozen=True)
class RepoCandidate:
    full_name: str
    stars: int
    commit_count: int
    issue_count: int
    contributor_count: int
    pr_count: int
    release_count: int
    last_commit_at: datetime
    is_fork: bool

    @classmethod
    def from_dict(cls, raw: dict) -> "RepoCandidate":
        return cls(
            full_name=raw["full_name"],
            stars=int(raw["stars"]),
            commit_count=int(raw["commit_count"]),
            issue_count=int(raw["issue_count"]),
            contributor_count=int(raw["contributor_count"]),
            pr_count=int(raw["pr_count"]),
            release_count=int(raw["release_count"]),
            last_commit_at=parse_utc(raw["last_commit_at"]),
            is_fork=bool(raw["is_fork"]),
        )


def _record_from_payload(payload: dict, repo_full_name: str, pr_number: int) -> PrRecord:
    comments = tuple(
        PrComment(
            container_id=str(c["id"]),
            author=(c.get("user") or {}).get("login", ""),
            body=c.get("body") or "",
        )
        for c in payload.get("comments", ())
    )
    review_comments = tuple(
        ReviewComment(
            container_id=str(c["id"]),
            author=(c.get("user") or {}).get("login", ""),
            body=c.get("body") or "",
            file_path=c.get("path") or "",
        )
        for c in payload.get("review_comments", ())
    )
    repo = payload.get("repo") or {}
    fetched_at = payload.get("fetched_at")
    return PrRecord(
        repo_full_name=repo.get("full_name") or repo_full_name,
        repo_description=repo.get("description") or "",
        pr_number=pr_number,
        title=payload.get("title") or "",
        description_body=payload.get("body") or "",
        comments=comments,
        review_comments=review_comments,
        fetched_at=parse_utc(fetched_at) if fetched_at else EPOCH,
    )


@dataclass
class GitHubClient:
    """Fetches PR records; fixture_dir switches to offline fixture mode."""

    auth_token: str = ""
    fixture_dir: str | Path | None = None
    base_url: str = API_BASE_URL
    timeout: float = 30.0
    concurrency: int = 4
    transport: httpx.BaseTransport | None = field(default=None, repr=False)

    def fetch_pr(self, repo_full_name: str, pr_number: int) -> PrRecord:
        if self.fixture_dir is not None:
            return self._fetch_fixture(repo_full_name, pr_number)
        return self._fetch_live(repo_full_name, pr_number)

    def fetch_prs(self, repo_full_name: str, pr_numbers: list[int]) -> list[PrRecord]:
        """Fetch several PRs with bounded concurrency, preserving input order."""
        workers = max(1, min(self.concurrency, len(pr_numbers) or 1))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(
                pool.map(lambda n: self.fetch_pr(repo_full_name, n), pr_numbers)
            )

    def list_fixture_prs(self, repo_full_name: str) -> list[int]:
        """PR numbers available in the fixture directory for a repository."""
        if self.fixture_dir is None:
            raise GitHubError("listing PRs requires fixture mode")
        numbers = []
        for path in sorted(Path(self.fixture_dir).glob("*.json")):
            try:
                payload = json.loads(path.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise GitHubError(f"unreadable fixture {path.name}: {exc}") from exc
            repo = (payload.get("repo") or {}).get("full_name", "")
            if repo.lower() == repo_full_name.lower() and "number" in payload:
                numbers.append(int(payload["number"]))
        return sorted(numbers)

    # -- fixture mode ------------------------------------------------------

    def _fixture_path(self, repo_full_name: str, pr_number: int) -> Path:
        name = f"{repo_full_name.replace('/', '-')}-{pr_number}.json"
        return Path(self.fixture_dir) / name

    def _fetch_fixture(self, repo_full_name: str, pr_number: int) -> PrRecord:
        path = self._fixture_path(repo_full_name, pr_number)
        if not path.is_file():
            raise PrNotFoundError(f"no fixture for {repo_full_name}#{pr_number}")
        payload = json.loads(path.read_text(encoding="utf-8"))
        return _record_from_payload(payload, repo_full_name, pr_number)

    # -- live mode ---------------------------------------------------------

    def _client(self) -> httpx.Client:
        headers = {"Accept": "application/vnd.github+json"}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        return httpx.Client(
            base_url=self.base_url,
            headers=headers,
            timeout=self.timeout,
            transport=self.transport,
        )

    def _fetch_live(self, repo_full_name: str, pr_number: int) -> PrRecord:
        with self._client() as client:
            pull = self._get_json(client, f"/repos/{repo_full_name}/pulls/{pr_number}")
            comments = self._get_paginated(
                client, f"/repos/{repo_full_name}/issues/{pr_number}/comments"
            )
            review_comments = self._get_paginated(
                client, f"/repos/{repo_full_name}/pulls/{pr_number}/comments"
            )
        base_repo = (pull.get("base") or {}).get("repo") or {}
        payload = {
            "title": pull.get("title"),
            "body": pull.get("body"),
            "comments": comments,
            "review_comments": review_comments,
            "repo": {
                "full_name": base_repo.get("full_name") or repo_full_name,
                "description": base_repo.get("description"),
            },
        }
        record = _record_from_payload(payload, repo_full_name, pr_number)
        return replace(record, fetched_at=utc_now())

    def _get_json(self, client: httpx.Client, path: str, params: dict | None = None):
        last_error: Exception | None = None
        for attempt in range(_RETRY_ATTEMPTS):
            try:
                response = client.get(path, params=params)
            except httpx.HTTPError as exc:
                last_error = GitHubTransportError(f"GET {path} failed: {exc}")
                time.sleep(_RETRY_BASE_DELAY * 2**attempt)
                continue
            if response.status_code == 404:
                raise PrNotFoundError(f"GET {path} returned 404")
            if response.status_code in (403, 429) and self._is_rate_limited(response):
                raise RateLimitedError(
                    f"GET {path} rate limited",
                    retry_after=self._retry_after(response),
                )
            if response.status_code >= 500:
                last_error = GitHubTransportError(
                    f"GET {path} returned {response.status_code}"
                )
                time.sleep(_RETRY_BASE_DELAY * 2**attempt)
                continue
            response.raise_for_status()
            return response.json()
        raise last_error or GitHubTransportError(f"GET {path} failed")

    def _get_paginated(self, client: httpx.Client, path: str) -> list[dict]:
        items: list[dict] = []
        page = 1
        while True:
            batch = self._get_json(
                client, path, params={"per_page": _PAGE_SIZE, "page": page}
            )
            items.extend(batch)
            if len(batch) < _PAGE_SIZE:
                return items
            page += 1

    @staticmethod
    def _is_rate_limited(response: httpx.Response) -> bool:
        if response.status_code == 429:
            return True
        return response.headers.get("X-RateLimit-Remaining") == "0"

    @staticmethod
    def _retry_after(response: httpx.Response) -> float:
        retry_after = response.headers.get("Retry-After")
        if retry_after:
            return float(retry_after)
        reset = response.headers.get("X-RateLimit-Reset")
        if reset:
            return max(0.0, float(reset) - time.time())
        return 60.0


def harvest_links(pr: PrRecord, min_words: int = 8) -> list[LinkOccurrence]:
    """Qualifying links from a PR: description first, then comments, then
    review comments, each in source order, classified against the PR's repo."""
    raw: list[LinkOccurrence] = []
    raw.extend(extract_links(pr.description_body, Location.DESCRIPTION, ""))
    for comment in pr.comments:
        raw.extend(extract_links(comment.body, Location.COMMENT, comment.container_id))
    for review in pr.review_comments:
        raw.extend(
            extract_links(review.body, Location.REVIEW_COMMENT, review.container_id)
        )
    classified = []
    for occurrence in raw:
        try:
            kind = classify_link(occurrence.url, pr.repo_full_name)
        except LinkClassificationError:
            continue
        classified.append(occurrence.classified(kind))
    return filter_by_label_length(classified, min_words)


def curate_repositories(
    candidates: list[RepoCandidate], cutoff: datetime
) -> list[RepoCandidate]:
    """Engineered-project filter: activity thresholds, recency, no forks.

    Survivors are sorted by stars descending, ties broken by name.
    """
    retained = [
        c
        for c in candidates
        if c.commit_count >= 100
        and c.issue_count >= 1
        and c.contributor_count >= 3
        and c.pr_count >= 100
        and c.release_count >= 1
        and c.last_commit_at >= cutoff
        and not c.is_fork
    ]
    return sorted(retained, key=lambda c: (-c.stars, c.full_name))
