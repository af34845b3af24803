"""Preview generation: context assembly, prompt rendering, and the three
strategies (contextual LLM, non-contextual LLM, metadata snippet).

Contextual bundles adapt to where the link appears: the body of the PR
description, discussion comment, or review comment that contains it is
carried alongside the PR and repository metadata. Non-contextual bundles
carry the page body alone; metadata bundles carry only the page's title
and description tags.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path

import httpx

from ailp.github import PrRecord
from ailp.links import LinkOccurrence, Location
from ailp.pages import PageContent
from ailp.util import format_utc, parse_utc, utc_now

_WORD_RE = re.compile(r"\S+")
_DEFAULT_PAGE_BUDGET_WORDS = 2000

_CONTEXTUAL_TEMPLATE = """\
You are helping a code reviewer understand a hyperlink found in a pull request.

Repository: {repo_name}
Repository description: {repo_description}
Pull request title: {pr_title}
Pull request description:
{pr_description}

Text where the link appears:
{located_body}

Link label: {link_label}

Linked page content:
{page_body}

Summarize the linked page for the code reviewer in at most 3 sentences.
"""

_NONCONTEXTUAL_TEMPLATE = """\
Linked page content:
{page_body}

Summarize the linked page for the code reviewer in at most 3 sentences.
"""


class Strategy(str, Enum):
    CONTEXTUAL = "contextual"
    NONCONTEXTUAL = "noncontextual"
    METADATA = "metadata"


class ContextError(Exception):
    """The occurrence's container cannot be resolved within the PR."""


class StrategyError(Exception):
    """An operation was invoked with a strategy it does not support."""


class NoMetadataError(Exception):
    """The page exposes no title or description metadata to snippet."""


class LlmError(Exception):
    """Base class for chat-completion failures."""


class LlmAuthError(LlmError):
    pass


class LlmRateLimitError(LlmError):
    def __init__(self, message: str, retry_after: float) -> None:
        super().__init__(message)
        self.retry_after = retry_after


class LlmTransportError(LlmError):
    pass


class EmptyCompletionError(LlmError):
    pass


@dataclass(frozen=True)
class ContextBundle:
    strategy: Strategy
    pr_title: str
    pr_description: str
    repo_name: str
    repo_description: str
    located_body: str
    link_label: str
    link_url: str
    page_body: str
    page_title: str
    page_meta_description: str
    truncated: bool


@dataclass(frozen=True)
class Summary:
    strategy: Strategy
    text: str
    model_id: str
    prompt_fingerprint: str
    created_at: datetime


def truncate_words(text: str, budget: int) -> tuple[str, bool]:
    """Cut after the budget-th word, preserving the original layout."""
    if budget < 0:
        raise ValueError("budget must be >= 0")
    matches = list(_WORD_RE.finditer(text))
    if len(matches) <= budget:
        return text, False
    if budget == 0:
        return "", True
    return text[: matches[budget - 1].end()], True


def _located_body(pr: PrRecord, occ: LinkOccurrence) -> str:
    if occ.location is Location.DESCRIPTION:
        return pr.description_body
    pool = pr.comments if occ.location is Location.COMMENT else pr.review_comments
    for item in pool:
        if item.container_id == occ.container_id:
            return item.body
    raise ContextError(
        f"container {occ.container_id!r} not found for location {occ.location.value}"
    )


def assemble_context(
    pr: PrRecord,
    occ: LinkOccurrence,
    page: PageContent,
    strategy: Strategy,
    budget: int = _DEFAULT_PAGE_BUDGET_WORDS,
) -> ContextBundle:
    """Bundle exactly the signals the strategy consumes."""
    if strategy is Strategy.METADATA:
        return ContextBundle(
            strategy=strategy,
            pr_title="",
            pr_description="",
            repo_name="",
            repo_description="",
            located_body="",
            link_label=occ.label,
            link_url=occ.url,
            page_body="",
            page_title=page.title,
            page_meta_description=page.meta_description,
            truncated=False,
        )
    page_body, truncated = truncate_words(page.body_text, budget)
    if strategy is Strategy.NONCONTEXTUAL:
        return ContextBundle(
            strategy=strategy,
            pr_title="",
            pr_description="",
            repo_name="",
            repo_description="",
            located_body="",
            link_label=occ.label,
            link_url=occ.url,
            page_body=page_body,
            page_title="",
            page_meta_description="",
            truncated=truncated,
        )
    return ContextBundle(
        strategy=strategy,
        pr_title=pr.title,
        pr_description=pr.description_body,
        repo_name=pr.repo_full_name,
        repo_description=pr.repo_description,
        located_body=_located_body(pr, occ),
        link_label=occ.label,
        link_url=occ.url,
        page_body=page_body,
        page_title="",
        page_meta_description="",
        truncated=truncated,
    )


def _field(value: str) -> str:
    return value if value else "(none)"


def build_prompt(bundle: ContextBundle) -> str:
    """Deterministic prompt for the LLM strategies."""
    if bundle.strategy is Strategy.CONTEXTUAL:
        return _CONTEXTUAL_TEMPLATE.format(
            repo_name=_field(bundle.repo_name),
            repo_description=_field(bundle.repo_description),
            pr_title=_field(bundle.pr_title),
            pr_description=_field(bundle.pr_description),
            located_body=_field(bundle.located_body),
            link_label=_field(bundle.link_label),
            page_body=_field(bundle.page_body),
        )
    if bundle.strategy is Strategy.NONCONTEXTUAL:
        return _NONCONTEXTUAL_TEMPLATE.format(page_body=_field(bundle.page_body))
    raise StrategyError("build_prompt only supports the LLM strategies")


def prompt_fingerprint(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class OpenAiChatClient:
    """Chat-completion client for OpenAI-compatible endpoints.

    Sends {model, messages, temperature} and reads the first choice's
    message content. Calls are bounded by a shared concurrency limit.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str,
        model: str,
        timeout: float = 60.0,
        max_concurrency: int = 2,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.timeout = timeout
        self._transport = transport
        self._slots = threading.Semaphore(max_concurrency)

    def complete(self, prompt: str) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        with self._slots:
            try:
                with httpx.Client(timeout=self.timeout, transport=self._transport) as client:
                    response = client.post(
                        f"{self.base_url}/chat/completions",
                        json=payload,
                        headers={"Authorization": f"Bearer {self.api_key}"},
                    )
            except httpx.HTTPError as exc:
                raise LlmTransportError(f"chat completion failed: {exc}") from exc
        if response.status_code in (401, 403):
            raise LlmAuthError(f"chat completion rejected: {response.status_code}")
        if response.status_code == 429:
            raise LlmRateLimitError(
                "chat completion rate limited",
                retry_after=float(response.headers.get("Retry-After", 60.0)),
            )
        if response.status_code >= 400:
            raise LlmTransportError(
                f"chat completion returned {response.status_code}"
            )
        try:
            text = response.json()["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise LlmTransportError(f"malformed completion response: {exc}") from exc
        return text or ""


class MockChatClient:
    """Deterministic stand-in: echoes a prefix plus the prompt's first words."""

    def __init__(self, prefix: str = "MOCK:", n_words: int = 5) -> None:
        self.prefix = prefix
        self.n_words = n_words
        self.model = "mock"
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        return " ".join([self.prefix, *prompt.split()[: self.n_words]])


def summarize_llm(bundle: ContextBundle, llm_client) -> Summary:
    """One chat-completion call over the rendered prompt, temperature 0."""
    prompt = build_prompt(bundle)
    text = llm_client.complete(prompt).strip()
    if not text:
        raise EmptyCompletionError("chat completion returned no text")
    return Summary(
        strategy=bundle.strategy,
        text=text,
        model_id=getattr(llm_client, "model", "unknown"),
        prompt_fingerprint=prompt_fingerprint(prompt),
        created_at=utc_now(),
    )


def snippet_metadata(page: PageContent) -> Summary:
    """Search-engine style snippet from the page's title and description."""
    title = page.title or page.og_title
    description = page.meta_description or page.og_description
    if title and description:
        text = f"{title} — {description}"
    elif title or description:
        text = title or description
    else:
        raise NoMetadataError(f"no title or description metadata for {page.requested_url}")
    return Summary(
        strategy=Strategy.METADATA,
        text=text,
        model_id="snippet",
        prompt_fingerprint="",
        created_at=utc_now(),
    )


class SummaryCache:
    """Optional on-disk memo of LLM summaries keyed by prompt fingerprint."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)

    def _path(self, strategy: Strategy, fingerprint: str) -> Path:
        return self.directory / f"{strategy.value}-{fingerprint}.json"

    def get(self, strategy: Strategy, fingerprint: str) -> Summary | None:
        path = self._path(strategy, fingerprint)
        if not path.is_file():
            return None
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None
        return Summary(
            strategy=Strategy(raw["strategy"]),
            text=raw["text"],
            model_id=raw["model_id"],
            prompt_fingerprint=raw["prompt_fingerprint"],
            created_at=parse_utc(raw["created_at"]),
        )

    def put(self, summary: Summary) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        payload = {
            "strategy": summary.strategy.value,
            "text": summary.text,
            "model_id": summary.model_id,
            "prompt_fingerprint": summary.prompt_fingerprint,
            "created_at": format_utc(summary.created_at),
        }
        self._path(summary.strategy, summary.prompt_fingerprint).write_text(
            json.dumps(payload, sort_keys=True, ensure_ascii=False), encoding="utf-8"
        )


def summarize(
    bundle: ContextBundle,
    page: PageContent,
    llm_client=None,
    cache: SummaryCache | None = None,
) -> Summary:
    """Dispatch one bundle to its strategy; LLM results go through the cache."""
    if bundle.strategy is Strategy.METADATA:
        return snippet_metadata(page)
    if llm_client is None:
        raise LlmAuthError("no chat-completion client configured")
    fingerprint = prompt_fingerprint(build_prompt(bundle))
    if cache is not None:
        cached = cache.get(bundle.strategy, fingerprint)
        if cached is not None:
            return cached
    summary = summarize_llm(bundle, llm_client)
    if cache is not None:
        cache.put(summary)
    return summary
