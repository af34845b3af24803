"""Local HTTP service behind the browser extension.

POST /api/v1/summarize runs fetch, context assembly, and the requested
strategies for one link; GET /api/v1/health reports configuration state.
The LLM API key stays in this process's environment and is only ever sent
to the configured chat-completion base URL.
"""

from __future__ import annotations

import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from ailp import __version__
from ailp.config import RunConfig
from ailp.github import (
    GitHubClient,
    GitHubError,
    PrNotFoundError,
    PrRecord,
    RateLimitedError,
    harvest_links,
)
from ailp.links import LinkKind, LinkOccurrence, Location
from ailp.pages import (
    CacheError,
    FetchPolicy,
    PageCache,
    PageContent,
    PageFetchError,
    PageFetcher,
    PageFixtures,
)
from ailp.summarize import (
    ContextError,
    EmptyCompletionError,
    LlmAuthError,
    LlmError,
    LlmRateLimitError,
    MockChatClient,
    NoMetadataError,
    OpenAiChatClient,
    Strategy,
    assemble_context,
    summarize,
)
from ailp.util import EPOCH

_PR_URL_RE = re.compile(r"^https://github\.com/([^/\s]+)/([^/\s]+)/pull/(\d+)/?$")
_ALLOWED_ORIGIN_RE = (
    r"^(chrome-extension|moz-extension)://.*$"
    r"|^https?://(localhost|127\.0\.0\.1)(:\d+)?$"
)

_UPSTREAM_KINDS = frozenset(
    {
        "fetch_error",
        "pr_not_found",
        "github_rate_limited",
        "github_error",
        "llm_auth",
        "llm_rate_limited",
        "llm_transport",
        "llm_empty",
    }
)


class LinkNotFoundError(Exception):
    """The requested URL does not occur as a Markdown link in the PR."""


def _error_kind(exc: Exception) -> str:
    mapping = (
        (PageFetchError, "fetch_error"),
        (PrNotFoundError, "pr_not_found"),
        (RateLimitedError, "github_rate_limited"),
        (GitHubError, "github_error"),
        (ContextError, "context_error"),
        (NoMetadataError, "no_metadata"),
        (LinkNotFoundError, "link_not_found"),
        (LlmAuthError, "llm_auth"),
        (LlmRateLimitError, "llm_rate_limited"),
        (EmptyCompletionError, "llm_empty"),
        (LlmError, "llm_transport"),
    )
    for exc_type, kind in mapping:
        if isinstance(exc, exc_type):
            return kind
    return "internal"


class SummarizeRequest(BaseModel):
    link_url: str
    pr_url: str
    location: Literal["description", "comment", "review_comment"]
    container_id: str = ""
    strategies: list[Literal["contextual", "noncontextual", "metadata"]] = Field(
        min_length=1
    )


class _PrStore:
    """Per-process PR memo so repeated previews on one PR reuse the fetch."""

    def __init__(self, client: GitHubClient, ttl_seconds: float = 300.0) -> None:
        self._client = client
        self._ttl = ttl_seconds
        self._entries: dict[tuple[str, int], tuple[float, PrRecord]] = {}
        self._lock = threading.Lock()

    def get(self, repo_full_name: str, pr_number: int) -> tuple[PrRecord, bool]:
        key = (repo_full_name.lower(), pr_number)
        with self._lock:
            entry = self._entries.get(key)
            if entry is not None and time.monotonic() - entry[0] < self._ttl:
                return entry[1], True
        record = self._client.fetch_pr(repo_full_name, pr_number)
        with self._lock:
            self._entries[key] = (time.monotonic(), record)
        return record, False


def _find_occurrence(
    pr: PrRecord, link_url: str, location: Location, container_id: str
) -> LinkOccurrence:
    candidates = harvest_links(pr, min_words=1)
    same_url = [c for c in candidates if c.url == link_url]
    for occ in same_url:
        if occ.location is location and occ.container_id == container_id:
            return occ
    if same_url:
        return same_url[0]
    raise LinkNotFoundError(f"{link_url} not found as a Markdown link in the PR")


def create_app(config: RunConfig | None = None) -> FastAPI:
    config = config or RunConfig.load()
    app = FastAPI(title="ailinkpreviewer", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=_ALLOWED_ORIGIN_RE,
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )

    github = GitHubClient(
        auth_token=config.github_token,
        fixture_dir=config.pr_fixture_dir,
        concurrency=config.github_concurrency,
    )
    pr_store = _PrStore(github)
    cache = PageCache(config.cache_dir / "pages")
    fixtures = (
        PageFixtures(config.page_fixture_dir)
        if config.page_fixture_dir is not None
        else None
    )
    fetcher = PageFetcher(
        policy=FetchPolicy(),
        cache=cache,
        fixtures=fixtures,
        max_in_flight=config.fetch_concurrency,
    )
    if config.mock_llm:
        chat_client = MockChatClient()
    elif config.llm_api_key:
        chat_client = OpenAiChatClient(
            base_url=config.llm_base_url,
            api_key=config.llm_api_key,
            model=config.llm_model,
            max_concurrency=config.llm_concurrency,
        )
    else:
        chat_client = None

    @app.exception_handler(RequestValidationError)
    async def _validation_to_400(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/api/v1/health")
    def health() -> dict:
        return {
            "status": "ok",
            "version": __version__,
            "llm_configured": chat_client is not None,
        }

    @app.post("/api/v1/summarize")
    def handle_summarize(request: SummarizeRequest) -> JSONResponse:
        match = _PR_URL_RE.match(request.pr_url)
        if match is None:
            return JSONResponse(
                status_code=400,
                content={"detail": f"pr_url is not a GitHub PR URL: {request.pr_url}"},
            )
        repo_full_name = f"{match.group(1)}/{match.group(2)}"
        pr_number = int(match.group(3))
        location = Location(request.location)
        strategies = [Strategy(s) for s in dict.fromkeys(request.strategies)]

        needs_llm = any(s is not Strategy.METADATA for s in strategies)
        if needs_llm and chat_client is None:
            return JSONResponse(
                status_code=401,
                content={
                    "detail": "LLM strategies requested but no API key is configured"
                },
            )

        page: PageContent | None = None
        page_cache_hit = False
        page_error: PageFetchError | None = None
        try:
            page_cache_hit = cache.get(request.link_url) is not None
        except CacheError:
            page_cache_hit = False
        try:
            page = fetcher.fetch(request.link_url)
        except PageFetchError as exc:
            page_error = exc

        pr: PrRecord | None = None
        pr_cache_hit = False
        pr_error: Exception | None = None
        if Strategy.CONTEXTUAL in strategies and page_error is None:
            try:
                pr, pr_cache_hit = pr_store.get(repo_full_name, pr_number)
            except GitHubError as exc:
                pr_error = exc

        def run_strategy(strategy: Strategy) -> dict:
            started = time.perf_counter()
            try:
                if page_error is not None:
                    raise page_error
                assert page is not None
                if strategy is Strategy.CONTEXTUAL:
                    if pr_error is not None:
                        raise pr_error
                    assert pr is not None
                    occ = _find_occurrence(
                        pr, request.link_url, location, request.container_id
                    )
                else:
                    occ = LinkOccurrence(
                        url=request.link_url,
                        label="",
                        location=location,
                        container_id=request.container_id,
                        char_span=(0, 0),
                        link_kind=LinkKind.EXTERNAL,
                        label_word_count=0,
                    )
                bundle = assemble_context(
                    pr if strategy is Strategy.CONTEXTUAL else _EMPTY_PR,
                    occ,
                    page,
                    strategy,
                    budget=config.page_budget_words,
                )
                summary = summarize(bundle, page, llm_client=chat_client)
            except Exception as exc:
                return {"error_kind": _error_kind(exc), "message": str(exc)}
            elapsed_ms = int((time.perf_counter() - started) * 1000)
            return {
                "text": summary.text,
                "model_id": summary.model_id,
                "elapsed_ms": elapsed_ms,
            }

        with ThreadPoolExecutor(max_workers=len(strategies)) as pool:
            outcomes = list(pool.map(run_strategy, strategies))
        results = {s.value: outcome for s, outcome in zip(strategies, outcomes)}

        succeeded = [r for r in results.values() if "text" in r]
        failures_upstream = [
            r
            for r in results.values()
            if "error_kind" in r and r["error_kind"] in _UPSTREAM_KINDS
        ]
        status = 200 if succeeded or not failures_upstream else 502
        return JSONResponse(
            status_code=status,
            content={
                "results": results,
                "page_title": page.title if page is not None else "",
                "cache_hits": {"pr": pr_cache_hit, "page": page_cache_hit},
            },
        )

    return app


# Placeholder PR for the strategies that never read PR fields.
_EMPTY_PR = PrRecord(
    repo_full_name="unknown/unknown",
    repo_description="",
    pr_number=1,
    title="",
    description_body="",
    comments=(),
    review_comments=(),
    fetched_at=EPOCH,
)
