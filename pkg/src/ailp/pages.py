"""Link-target fetching: HTTP retrieval, metadata and body-text extraction,
and an on-disk cache keyed by normalized URL.

HTML is parsed leniently with the stdlib parser; boilerplate subtrees
(script, style, nav, header, footer, aside, noscript, template) are
dropped. A fixtures directory can stand in for the network so evaluation
runs are fully reproducible offline.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
import threading
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timedelta
from html.parser import HTMLParser
from pathlib import Path
from typing import Callable
from urllib.parse import parse_qsl, urlencode, urlsplit, urlunsplit

import httpx

from ailp.util import EPOCH, format_utc, parse_utc, utc_now

_REMOVED_TAGS = frozenset(
    {"script", "style", "nav", "header", "footer", "aside", "noscript", "template", "title"}
)
_BLOCK_TAGS = frozenset(
    {
        "address", "article", "blockquote", "body", "br", "caption", "dd",
        "details", "div", "dl", "dt", "fieldset", "figcaption", "figure",
        "form", "h1", "h2", "h3", "h4", "h5", "h6", "head", "hr", "html",
        "legend", "li", "main", "ol", "option", "p", "pre", "section",
        "summary", "table", "tbody", "td", "tfoot", "th", "thead", "tr", "ul",
    }
)
_TAG_LIKE = re.compile(r"<(?=/?[A-Za-z])")
_HTML_CONTENT_TYPES = ("text/html", "application/xhtml+xml")


class PageFetchError(Exception):
    """Fetch failed before a response body could be recorded."""

    def __init__(self, message: str, requested_url: str, kind: str = "transport") -> None:
        super().__init__(message)
        self.requested_url = requested_url
        self.kind = kind


class CacheError(Exception):
    """The cache store could not be read or written."""


@dataclass(frozen=True)
class FetchPolicy:
    timeout: float = 10.0
    max_bytes: int = 2 * 1024 * 1024
    max_redirects: int = 5
    user_agent: str = "ailinkpreviewer/0.1"


@dataclass(frozen=True)
class PageContent:
    requested_url: str
    final_url: str
    http_status: int
    content_type: str
    title: str
    meta_description: str
    og_title: str
    og_description: str
    body_text: str
    fetched_at: datetime


class _BodyTextParser(HTMLParser):
    """Renders visible text: one line per block, whitespace collapsed."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self._skip_depth = 0
        self._lines: list[str] = []
        self._current: list[str] = []

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in _REMOVED_TAGS:
            self._skip_depth += 1
            return
        if tag in _BLOCK_TAGS:
            self._flush()

    def handle_endtag(self, tag: str) -> None:
        if tag in _REMOVED_TAGS:
            self._skip_depth = max(0, self._skip_depth - 1)
            return
        if tag in _BLOCK_TAGS:
            self._flush()

    def handle_startendtag(self, tag: str, attrs) -> None:
        if tag in _BLOCK_TAGS and tag not in _REMOVED_TAGS:
            self._flush()

    def handle_data(self, data: str) -> None:
        if self._skip_depth > 0:
            return
        pieces = data.split("\n")
        self._current.append(pieces[0])
        for piece in pieces[1:]:
            self._flush()
            self._current.append(piece)

    def _flush(self) -> None:
        line = " ".join("".join(self._current).split())
        if line:
            self._lines.append(line)
        self._current = []

    def text(self) -> str:
        self._flush()
        return "\n".join(self._lines)


def extract_body_text(html: str) -> str:
    """Visible text with boilerplate subtrees removed.

    Block elements and source newlines separate lines; whitespace runs
    collapse to single spaces within a line. Leftover tag-like markup is
    re-escaped so the result never contains an HTML tag.
    """
    parser = _BodyTextParser()
    parser.feed(html)
    parser.close()
    return _TAG_LIKE.sub("&lt;", parser.text())


class _MetadataParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.title = ""
        self.meta_description = ""
        self.og_title = ""
        self.og_description = ""
        self._in_title = False
        self._title_parts: list[str] = []
        self._title_seen = False

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag == "title" and not self._title_seen:
            self._in_title = True
        elif tag == "meta":
            self._handle_meta(dict(attrs))

    def handle_startendtag(self, tag: str, attrs) -> None:
        if tag == "meta":
            self._handle_meta(dict(attrs))

    def handle_endtag(self, tag: str) -> None:
        if tag == "title" and self._in_title:
            self._in_title = False
            self._title_seen = True
            self.title = " ".join("".join(self._title_parts).split())

    def handle_data(self, data: str) -> None:
        if self._in_title:
            self._title_parts.append(data)

    def _handle_meta(self, attrs: dict) -> None:
        content = (attrs.get("content") or "").strip()
        if not content:
            return
        name = (attrs.get("name") or "").lower()
        prop = (attrs.get("property") or "").lower()
        if name == "description" and not self.meta_description:
            self.meta_description = content
        if "og:title" in (name, prop) and not self.og_title:
            self.og_title = content
        if "og:description" in (name, prop) and not self.og_description:
            self.og_description = content


def _build_page(
    requested_url: str,
    final_url: str,
    status: int,
    content_type: str,
    text: str,
    fetched_at: datetime,
) -> PageContent:
    is_html = content_type in _HTML_CONTENT_TYPES
    if 200 <= status < 300 and is_html:
        meta = _MetadataParser()
        meta.feed(text)
        meta.close()
        body_text = extract_body_text(text)
        return PageContent(
            requested_url=requested_url,
            final_url=final_url,
            http_status=status,
            content_type=content_type,
            title=meta.title,
            meta_description=meta.meta_description,
            og_title=meta.og_title,
            og_description=meta.og_description,
            body_text=body_text,
            fetched_at=fetched_at,
        )
    return PageContent(
        requested_url=requested_url,
        final_url=final_url,
        http_status=status,
        content_type=content_type,
        title="",
        meta_description="",
        og_title="",
        og_description="",
        body_text="",
        fetched_at=fetched_at,
    )


def fetch_page(
    url: str,
    policy: FetchPolicy = FetchPolicy(),
    transport: httpx.BaseTransport | None = None,
) -> PageContent:
    """GET a page within the policy's redirect/size/time limits."""
    headers = {"User-Agent": policy.user_agent}
    try:
        with httpx.Client(
            follow_redirects=True,
            max_redirects=policy.max_redirects,
            timeout=policy.timeout,
            headers=headers,
            transport=transport,
        ) as client:
            with client.stream("GET", url) as response:
                raw = b""
                for chunk in response.iter_bytes():
                    raw += chunk
                    if len(raw) >= policy.max_bytes:
                        raw = raw[: policy.max_bytes]
                        break
                status = response.status_code
                final_url = str(response.url)
                content_type = _media_type(response.headers.get("Content-Type", ""))
                charset = response.charset_encoding or "utf-8"
    except httpx.TimeoutException as exc:
        raise PageFetchError(f"timed out fetching {url}", url, kind="timeout") from exc
    except httpx.TooManyRedirects as exc:
        raise PageFetchError(
            f"too many redirects fetching {url}", url, kind="too_many_redirects"
        ) from exc
    except httpx.HTTPError as exc:
        raise PageFetchError(f"fetch failed for {url}: {exc}", url) from exc
    text = raw.decode(charset, errors="replace")
    return _build_page(url, final_url, status, content_type, text, utc_now())


def _media_type(header_value: str) -> str:
    return header_value.split(";", 1)[0].strip().lower()


def normalize_url(url: str) -> str:
    """Lowercase scheme and host, strip the fragment, sort query pairs."""
    parts = urlsplit(url)
    netloc = parts.netloc
    if "@" in netloc:
        userinfo, _, hostport = netloc.rpartition("@")
        netloc = f"{userinfo}@{hostport.lower()}"
    else:
        netloc = netloc.lower()
    query = urlencode(sorted(parse_qsl(parts.query, keep_blank_values=True)))
    return urlunsplit((parts.scheme.lower(), netloc, parts.path, query, ""))


class PageCache:
    """One JSON document per entry under a hash of the normalized URL.

    Successful pages expire after ttl; recorded failures after failure_ttl.
    Writes are atomic, so concurrent readers never see partial entries.
    """

    def __init__(
        self,
        directory: str | Path,
        ttl: timedelta = timedelta(days=7),
        failure_ttl: timedelta = timedelta(hours=1),
        now: Callable[[], datetime] = utc_now,
    ) -> None:
        self.directory = Path(directory)
        self.ttl = ttl
        self.failure_ttl = failure_ttl
        self._now = now
        self._lock = threading.Lock()

    def _entry_path(self, url: str) -> Path:
        digest = hashlib.sha256(normalize_url(url).encode()).hexdigest()
        return self.directory / f"{digest}.json"

    def _read_entry(self, url: str) -> dict | None:
        path = self._entry_path(url)
        try:
            raw = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return None
        except OSError as exc:
            raise CacheError(f"cannot read cache entry for {url}: {exc}") from exc
        try:
            return json.loads(raw)
        except json.JSONDecodeError:
            return None

    def _write_entry(self, url: str, entry: dict) -> None:
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            with self._lock:
                fd, tmp_name = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
                with os.fdopen(fd, "w", encoding="utf-8") as handle:
                    json.dump(entry, handle, sort_keys=True, ensure_ascii=False)
                os.replace(tmp_name, self._entry_path(url))
        except OSError as exc:
            raise CacheError(f"cannot write cache entry for {url}: {exc}") from exc

    def _expired(self, entry: dict, ttl: timedelta) -> bool:
        return self._now() - parse_utc(entry["stored_at"]) >= ttl

    def get(self, url: str) -> PageContent | None:
        entry = self._read_entry(url)
        if not entry or entry.get("kind") != "page" or self._expired(entry, self.ttl):
            return None
        page = entry["page"]
        return PageContent(
            requested_url=page["requested_url"],
            final_url=page["final_url"],
            http_status=page["http_status"],
            content_type=page["content_type"],
            title=page["title"],
            meta_description=page["meta_description"],
            og_title=page["og_title"],
            og_description=page["og_description"],
            body_text=page["body_text"],
            fetched_at=parse_utc(page["fetched_at"]),
        )

    def put(self, page: PageContent) -> None:
        entry = {
            "kind": "page",
            "stored_at": format_utc(self._now()),
            "page": {
                "requested_url": page.requested_url,
                "final_url": page.final_url,
                "http_status": page.http_status,
                "content_type": page.content_type,
                "title": page.title,
                "meta_description": page.meta_description,
                "og_title": page.og_title,
                "og_description": page.og_description,
                "body_text": page.body_text,
                "fetched_at": format_utc(page.fetched_at),
            },
        }
        self._write_entry(page.requested_url, entry)

    def get_failure(self, url: str) -> PageFetchError | None:
        entry = self._read_entry(url)
        if (
            not entry
            or entry.get("kind") != "failure"
            or self._expired(entry, self.failure_ttl)
        ):
            return None
        return PageFetchError(
            entry["message"], entry["requested_url"], kind=entry["error_kind"]
        )

    def put_failure(self, error: PageFetchError) -> None:
        entry = {
            "kind": "failure",
            "stored_at": format_utc(self._now()),
            "requested_url": error.requested_url,
            "error_kind": error.kind,
            "message": str(error),
        }
        self._write_entry(error.requested_url, entry)


class PageFixtures:
    """Stored pages: a manifest.json mapping URLs to files and metadata."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        manifest = json.loads((self.directory / "manifest.json").read_text("utf-8"))
        self._entries = {normalize_url(url): spec for url, spec in manifest.items()}

    def fetch(self, url: str) -> PageContent:
        spec = self._entries.get(normalize_url(url))
        if spec is None:
            raise PageFetchError(f"no fixture page for {url}", url)
        text = ""
        if "file" in spec:
            text = (self.directory / spec["file"]).read_text(encoding="utf-8")
        return _build_page(
            requested_url=url,
            final_url=spec.get("final_url", url),
            status=int(spec.get("status", 200)),
            content_type=spec.get("content_type", "text/html"),
            text=text,
            fetched_at=EPOCH,
        )


class PageFetcher:
    """Cache-backed page access with global and per-host concurrency bounds."""

    def __init__(
        self,
        policy: FetchPolicy = FetchPolicy(),
        cache: PageCache | None = None,
        fixtures: PageFixtures | None = None,
        transport: httpx.BaseTransport | None = None,
        max_in_flight: int = 8,
        per_host_limit: int = 2,
    ) -> None:
        self.policy = policy
        self.cache = cache
        self.fixtures = fixtures
        self._transport = transport
        self._global_slots = threading.Semaphore(max_in_flight)
        self._host_slots: dict[str, threading.Semaphore] = defaultdict(
            lambda: threading.Semaphore(per_host_limit)
        )
        self._host_lock = threading.Lock()

    def fetch(self, url: str) -> PageContent:
        """Cached page if fresh, else fixture/live fetch written through."""
        if self.cache is not None:
            try:
                cached = self.cache.get(url)
                if cached is not None:
                    return cached
                failure = self.cache.get_failure(url)
                if failure is not None:
                    raise failure
            except CacheError:
                pass
        try:
            page = self._fetch_uncached(url)
        except PageFetchError as exc:
            self._record_failure(exc)
            raise
        if self.cache is not None:
            try:
                self.cache.put(page)
            except CacheError:
                pass
        return page

    def _fetch_uncached(self, url: str) -> PageContent:
        if self.fixtures is not None:
            return self.fixtures.fetch(url)
        host = (urlsplit(url).hostname or "").lower()
        with self._host_lock:
            host_slot = self._host_slots[host]
        with self._global_slots, host_slot:
            return fetch_page(url, self.policy, transport=self._transport)

    def _record_failure(self, error: PageFetchError) -> None:
        if self.cache is not None:
            try:
                self.cache.put_failure(error)
            except CacheError:
                pass
