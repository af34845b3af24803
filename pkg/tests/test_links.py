"""Markdown link extraction, label filtering, and internal/external rules."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ailp.links import (
    LinkClassificationError,
    LinkKind,
    Location,
    classify_link,
    extract_links,
    filter_by_label_length,
    is_absolute_url,
)


def extract(text):
    return extract_links(text, Location.DESCRIPTION, "")


class TestExtractLinks:
    def test_single_link_with_word_count(self):
        text = "see [the new color mode migration guide for v5 users](https://x.example/guide)"
        links = extract(text)
        assert len(links) == 1
        assert links[0].url == "https://x.example/guide"
        assert links[0].label == "the new color mode migration guide for v5 users"
        assert links[0].label_word_count == 9

    def test_empty_text(self):
        assert extract("") == []

    def test_code_span_link_excluded(self):
        text = "`[a](b)` and [real link label here with many words](https://e.x/p)"
        links = extract(text)
        assert len(links) == 1
        assert links[0].url == "https://e.x/p"

    def test_fenced_block_links_excluded(self):
        text = "```\n[inside fence](https://a.example/)\n```\n[outside the fence](https://b.example/)"
        links = extract(text)
        assert [l.url for l in links] == ["https://b.example/"]

    def test_unclosed_fence_swallows_rest(self):
        text = "before [kept link here](https://a.example/)\n```\n[lost](https://b.example/)"
        assert [l.url for l in extract(text)] == ["https://a.example/"]

    def test_tilde_fence(self):
        text = "~~~\n[inside](https://a.example/)\n~~~\n[after](https://b.example/)"
        assert [l.url for l in extract(text)] == ["https://b.example/"]

    def test_document_order_and_spans_not_overlapping(self):
        text = "[first](https://a.example/) then [second](https://b.example/)"
        links = extract(text)
        assert [l.url for l in links] == ["https://a.example/", "https://b.example/"]
        assert links[0].char_span[1] <= links[1].char_span[0]

    def test_char_span_round_trip(self):
        text = "pad [label text](https://a.example/x) pad"
        (link,) = extract(text)
        start, end = link.char_span
        assert text[start:end] == "[label text](https://a.example/x)"
        (reparsed,) = extract(text[start:end])
        assert (reparsed.label, reparsed.url) == (link.label, link.url)

    def test_nested_brackets_in_label(self):
        (link,) = extract("[see [section 2] notes](https://a.example/)")
        assert link.label == "see [section 2] notes"

    def test_reference_style_not_returned(self):
        assert extract("[label here][ref]") == []

    def test_autolink_not_returned(self):
        assert extract("<https://a.example/>") == []

    def test_image_syntax_not_returned(self):
        assert extract("![alt text](https://a.example/img.png)") == []

    def test_relative_target_skipped(self):
        assert extract("[docs](./docs/readme.md)") == []

    def test_malformed_candidates_skipped(self):
        assert extract("[unclosed](https://a.example") == []
        assert extract("[no target]") == []

    def test_url_with_quoted_title(self):
        (link,) = extract('[label](https://a.example/x "the title")')
        assert link.url == "https://a.example/x"

    def test_url_with_balanced_parens(self):
        (link,) = extract("[wiki](https://en.example/wiki/Foo_(bar))")
        assert link.url == "https://en.example/wiki/Foo_(bar)"

    def test_escaped_bracket_not_an_opener(self):
        assert extract(r"\[not a link](https://a.example/)") == []

    def test_code_span_inside_label_is_kept(self):
        (link,) = extract("[uses `flag` here](https://a.example/)")
        assert link.label == "uses `flag` here"

    def test_location_and_container_recorded(self):
        (link,) = extract_links("[a b](https://a.example/)", Location.COMMENT, "c-9")
        assert link.location is Location.COMMENT
        assert link.container_id == "c-9"

    def test_multiline_label(self):
        (link,) = extract("[two\nlines](https://a.example/)")
        assert link.label_word_count == 2


class TestFilterByLabelLength:
    def make(self, label):
        (link,) = extract(f"[{label}](https://a.example/)")
        return link

    def test_terse_label_excluded(self):
        assert filter_by_label_length([self.make("click here")], 8) == []

    def test_boundary_label_retained(self):
        link = self.make("a label of exactly eight words total here")
        assert link.label_word_count == 8
        assert filter_by_label_length([link], 8) == [link]

    def test_mixed_list_order_preserved(self):
        three = self.make("just three words")
        eight = self.make("one two three four five six seven eight")
        twelve = self.make("one two three four five six seven eight nine ten eleven twelve")
        assert filter_by_label_length([three, eight, twelve], 8) == [eight, twelve]

    def test_min_words_one_keeps_non_empty_labels(self):
        links = [self.make("x"), self.make("y z")]
        assert filter_by_label_length(links, 1) == links

    def test_idempotent(self):
        links = [self.make("one two three four five six seven eight")]
        once = filter_by_label_length(links, 8)
        assert filter_by_label_length(once, 8) == once

    def test_rejects_zero_min_words(self):
        with pytest.raises(ValueError):
            filter_by_label_length([], 0)


class TestClassifyLink:
    def test_same_repo_issue_is_internal(self):
        kind = classify_link("https://github.com/twbs/bootstrap/issues/1", "twbs/bootstrap")
        assert kind is LinkKind.INTERNAL

    def test_other_host_is_external(self):
        kind = classify_link("https://developer.mozilla.org/x", "twbs/bootstrap")
        assert kind is LinkKind.EXTERNAL

    def test_other_repo_same_host_is_external(self):
        kind = classify_link("https://github.com/rails/rails/pull/2", "twbs/bootstrap")
        assert kind is LinkKind.EXTERNAL

    def test_case_insensitive_owner_name(self):
        kind = classify_link("https://github.com/TWBS/Bootstrap/pull/3", "twbs/bootstrap")
        assert kind is LinkKind.INTERNAL

    def test_bare_repo_url_is_internal(self):
        kind = classify_link("https://github.com/twbs/bootstrap", "twbs/bootstrap")
        assert kind is LinkKind.INTERNAL

    def test_owner_prefix_does_not_leak(self):
        kind = classify_link("https://github.com/twbs/bootstrap-icons/x", "twbs/bootstrap")
        assert kind is LinkKind.EXTERNAL

    def test_unparsable_url_raises(self):
        with pytest.raises(LinkClassificationError):
            classify_link("not a url", "twbs/bootstrap")


class TestIsAbsoluteUrl:
    @pytest.mark.parametrize(
        "url,expected",
        [
            ("https://a.example/x", True),
            ("http://a.example", True),
            ("mailto:dev@example.com", True),
            ("./relative", False),
            ("//protocol-relative.example", False),
            ("https://", False),
            ("", False),
            ("https://a.example/has space", False),
        ],
    )
    def test_cases(self, url, expected):
        assert is_absolute_url(url) is expected


# Planted-document property: build documents from known pieces and check
# the extractor returns exactly the planted links outside code regions.

safe_words = st.sampled_from(["alpha", "beta", "gamma", "delta", "review", "notes"])
labels = st.lists(safe_words, min_size=1, max_size=4).map(" ".join)
urls = st.integers(min_value=0, max_value=999).map(
    lambda n: f"https://site{n}.example/path{n}"
)


@st.composite
def planted_documents(draw):
    pieces = []
    plants = []
    n_pieces = draw(st.integers(min_value=1, max_value=6))
    for _ in range(n_pieces):
        kind = draw(st.sampled_from(["filler", "link", "code_span", "fence"]))
        label = draw(labels)
        url = draw(urls)
        if kind == "filler":
            pieces.append(draw(labels))
        elif kind == "link":
            pieces.append(f"[{label}]({url})")
            plants.append((label, url))
        elif kind == "code_span":
            pieces.append(f"`[{label}]({url})`")
        else:
            pieces.append(f"\n```\n[{label}]({url})\n```\n")
    return " ".join(pieces), plants


@given(planted_documents())
@settings(max_examples=120, deadline=None)
def test_extracts_exactly_the_planted_links(doc_and_plants):
    document, plants = doc_and_plants
    found = extract(document)
    assert [(l.label, l.url) for l in found] == plants
    spans = [l.char_span for l in found]
    assert all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))
    for link in found:
        start, end = link.char_span
        (reparsed,) = extract(document[start:end])
        assert (reparsed.label, reparsed.url) == (link.label, link.url)
