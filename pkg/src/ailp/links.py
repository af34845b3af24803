"""Markdown hyperlink extraction from PR text bodies.

Targets inline ``[label](url)`` links only. Fenced code blocks and inline
code spans are treated as opaque text, so links inside them are never
returned; reference-style links and autolinks are ignored.
"""

from __future__ import annotations

import re
from bisect import bisect_right
from dataclasses import dataclass, replace
from enum import Enum
from urllib.parse import urlparse

_FENCE_RE = re.compile(r"^ {0,3}(`{3,}|~{3,})(.*)$")
_BACKTICK_RUN_RE = re.compile(r"`+")
_SCHEME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*$")
_TITLE_RE = re.compile(r"""^("[^"]*"|'[^']*')$""")


class Location(str, Enum):
    DESCRIPTION = "description"
    COMMENT = "comment"
    REVIEW_COMMENT = "review_comment"


class LinkKind(str, Enum):
    INTERNAL = "internal"
    EXTERNAL = "external"


class LinkClassificationError(ValueError):
    """URL cannot be parsed; the caller should drop the occurrence."""


@dataclass(frozen=True)
class LinkOccurrence:
    """One inline Markdown link found in a PR text body.

    char_span indexes the source string the link was parsed from:
    source[char_span[0]:char_span[1]] is exactly the ``[label](target)``
    text of the occurrence.
    """

    url: str
    label: str
    location: Location
    container_id: str
    char_span: tuple[int, int]
    link_kind: LinkKind
    label_word_count: int

    def classified(self, kind: LinkKind) -> "LinkOccurrence":
        return replace(self, link_kind=kind)


def _excluded_spans(text: str) -> list[tuple[int, int]]:
    """Spans covered by fenced code blocks or inline code spans, sorted."""
    spans: list[tuple[int, int]] = []

    fence_char = ""
    fence_len = 0
    fence_start = -1
    offset = 0
    for line in text.splitlines(keepends=True):
        stripped = line.rstrip("\n").rstrip("\r")
        match = _FENCE_RE.match(stripped)
        if fence_start < 0:
            if match:
                fence_char = match.group(1)[0]
                fence_len = len(match.group(1))
                fence_start = offset
        elif (
            match
            and match.group(1)[0] == fence_char
            and len(match.group(1)) >= fence_len
            and not match.group(2).strip()
        ):
            spans.append((fence_start, offset + len(line)))
            fence_start = -1
        offset += len(line)
    if fence_start >= 0:
        spans.append((fence_start, len(text)))

    # Inline code spans outside the fences: a backtick run opens a span
    # closed by the next run of exactly the same length.
    runs = [
        (m.start(), m.end())
        for m in _BACKTICK_RUN_RE.finditer(text)
        if not _span_overlaps(spans, m.start(), m.end())
    ]
    i = 0
    while i < len(runs):
        start, end = runs[i]
        length = end - start
        closer = next(
            (j for j in range(i + 1, len(runs)) if runs[j][1] - runs[j][0] == length),
            None,
        )
        if closer is None:
            i += 1
            continue
        spans.append((start, runs[closer][1]))
        i = closer + 1

    return sorted(spans)


def _span_overlaps(spans: list[tuple[int, int]], start: int, end: int) -> bool:
    return any(s < end and start < e for s, e in spans)


def _region_end_at(spans: list[tuple[int, int]], pos: int) -> int | None:
    """End of the excluded region covering pos, if any. spans must be sorted."""
    i = bisect_right(spans, (pos, float("inf"))) - 1
    if i >= 0 and spans[i][0] <= pos < spans[i][1]:
        return spans[i][1]
    return None


def _scan_balanced(
    text: str, start: int, open_ch: str, close_ch: str, spans: list[tuple[int, int]]
) -> int:
    """Index of the balancing close_ch at depth 0, or -1. Skips escapes and
    excluded regions."""
    depth = 0
    i = start
    while i < len(text):
        region_end = _region_end_at(spans, i)
        if region_end is not None:
            i = region_end
            continue
        ch = text[i]
        if ch == "\\":
            i += 2
            continue
        if ch == open_ch:
            depth += 1
        elif ch == close_ch:
            if depth == 0:
                return i
            depth -= 1
        i += 1
    return -1


def _parse_target(raw: str) -> str | None:
    """URL from the parenthesized part, allowing an optional quoted title."""
    target = raw.strip()
    if not target:
        return None
    parts = target.split(None, 1)
    if len(parts) == 2:
        url, rest = parts
        if not _TITLE_RE.match(rest.strip()):
            return None
    else:
        url = parts[0]
    return url if is_absolute_url(url) else None


def is_absolute_url(url: str) -> bool:
    if not url or any(c.isspace() for c in url):
        return False
    try:
        parsed = urlparse(url)
    except ValueError:
        return False
    if not parsed.scheme or not _SCHEME_RE.match(parsed.scheme):
        return False
    if parsed.scheme in ("http", "https"):
        return bool(parsed.netloc)
    return bool(parsed.netloc or parsed.path)


def extract_links(
    source_text: str, location: Location, container_id: str = ""
) -> list[LinkOccurrence]:
    """Every non-overlapping inline Markdown link in document order.

    Malformed candidates are skipped. The returned occurrences default to
    external; classify_link against a repository refines the kind.
    """
    spans = _excluded_spans(source_text)
    occurrences: list[LinkOccurrence] = []
    i = 0
    n = len(source_text)
    while i < n:
        region_end = _region_end_at(spans, i)
        if region_end is not None:
            i = region_end
            continue
        ch = source_text[i]
        if ch == "\\":
            i += 2
            continue
        if ch != "[":
            i += 1
            continue
        if i > 0 and source_text[i - 1] == "!" and not _is_escaped(source_text, i - 1):
            i += 1  # image syntax, not a hyperlink
            continue
        label_end = _scan_balanced(source_text, i + 1, "[", "]", spans)
        if label_end < 0 or label_end + 1 >= n or source_text[label_end + 1] != "(":
            i += 1
            continue
        target_end = _scan_balanced(source_text, label_end + 2, "(", ")", spans)
        if target_end < 0:
            i += 1
            continue
        url = _parse_target(source_text[label_end + 2 : target_end])
        if url is None:
            i += 1
            continue
        label = source_text[i + 1 : label_end]
        occurrences.append(
            LinkOccurrence(
                url=url,
                label=label,
                location=location,
                container_id=container_id,
                char_span=(i, target_end + 1),
                link_kind=LinkKind.EXTERNAL,
                label_word_count=len(label.split()),
            )
        )
        i = target_end + 1
    return occurrences


def _is_escaped(text: str, pos: int) -> bool:
    backslashes = 0
    while pos - backslashes - 1 >= 0 and text[pos - backslashes - 1] == "\\":
        backslashes += 1
    return backslashes % 2 == 1


def filter_by_label_length(
    links: list[LinkOccurrence], min_words: int = 8
) -> list[LinkOccurrence]:
    """Occurrences whose labels have at least min_words whitespace tokens."""
    if min_words < 1:
        raise ValueError("min_words must be >= 1")
    return [link for link in links if link.label_word_count >= min_words]


def classify_link(url: str, repo_full_name: str) -> LinkKind:
    """Internal iff the URL targets a path inside the repository on github.com."""
    try:
        parsed = urlparse(url)
    except ValueError as exc:
        raise LinkClassificationError(f"unparsable URL: {url!r}") from exc
    if not is_absolute_url(url):
        raise LinkClassificationError(f"not an absolute URL: {url!r}")
    if (parsed.hostname or "").lower() != "github.com":
        return LinkKind.EXTERNAL
    path = parsed.path if parsed.path.endswith("/") else parsed.path + "/"
    if path.lower().startswith(f"/{repo_full_name.lower()}/"):
        return LinkKind.INTERNAL
    return LinkKind.EXTERNAL
