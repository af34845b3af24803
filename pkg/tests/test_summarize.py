"""Context assembly, prompt rendering, and the three preview strategies."""

from dataclasses import replace

import httpx
import pytest

from ailp.github import PrComment, PrRecord, ReviewComment
from ailp.links import LinkKind, LinkOccurrence, Location
from ailp.pages import PageContent
from ailp.summarize import (
    ContextError,
    EmptyCompletionError,
    LlmAuthError,
    LlmRateLimitError,
    MockChatClient,
    NoMetadataError,
    OpenAiChatClient,
    Strategy,
    StrategyError,
    SummaryCache,
    assemble_context,
    build_prompt,
    prompt_fingerprint,
    snippet_metadata,
    summarize,
    summarize_llm,
    truncate_words,
)
from ailp.util import EPOCH


def make_pr(**overrides) -> PrRecord:
    base = dict(
        repo_full_name="octoworks/palette",
        repo_description="Color utilities",
        pr_number=101,
        title="Document the new contrast tokens",
        description_body="Description body with a link.",
        comments=(PrComment("9001", "devone", "Comment body with a link."),),
        review_comments=(
            ReviewComment("9101", "devtwo", "Review comment body with a link.", "a.css"),
        ),
        fetched_at=EPOCH,
    )
    base.update(overrides)
    return PrRecord(**base)


def make_occ(location=Location.DESCRIPTION, container_id="", **overrides):
    base = dict(
        url="https://docs.example.org/guide",
        label="an eight word label for the guide page",
        location=location,
        container_id=container_id,
        char_span=(0, 10),
        link_kind=LinkKind.EXTERNAL,
        label_word_count=8,
    )
    base.update(overrides)
    return LinkOccurrence(**base)


def make_page(**overrides) -> PageContent:
    base = dict(
        requested_url="https://docs.example.org/guide",
        final_url="https://docs.example.org/guide",
        http_status=200,
        content_type="text/html",
        title="Guide title",
        meta_description="Guide description.",
        og_title="OG guide title",
        og_description="OG guide description.",
        body_text="Ten words of body text for the guide page here.",
        fetched_at=EPOCH,
    )
    base.update(overrides)
    return PageContent(**base)


class TestTruncateWords:
    def test_no_truncation_under_budget(self):
        assert truncate_words("a b c", 5) == ("a b c", False)

    def test_truncates_at_word_boundary(self):
        text = " ".join(f"w{i}" for i in range(10))
        kept, truncated = truncate_words(text, 5)
        assert truncated is True
        assert kept.split() == ["w0", "w1", "w2", "w3", "w4"]

    def test_zero_budget(self):
        assert truncate_words("a b", 0) == ("", True)

    def test_preserves_internal_layout(self):
        kept, _ = truncate_words("one\ntwo three four", 2)
        assert kept == "one\ntwo"


class TestAssembleContext:
    @pytest.mark.parametrize(
        "location,container_id,expected_body",
        [
            (Location.DESCRIPTION, "", "Description body with a link."),
            (Location.COMMENT, "9001", "Comment body with a link."),
            (Location.REVIEW_COMMENT, "9101", "Review comment body with a link."),
        ],
    )
    def test_contextual_selects_container_body(self, location, container_id, expected_body):
        bundle = assemble_context(
            make_pr(), make_occ(location, container_id), make_page(), Strategy.CONTEXTUAL
        )
        assert bundle.located_body == expected_body
        assert bundle.pr_title == "Document the new contrast tokens"
        assert bundle.repo_name == "octoworks/palette"
        assert bundle.page_body.startswith("Ten words")

    @pytest.mark.parametrize(
        "location,container_id",
        [
            (Location.DESCRIPTION, ""),
            (Location.COMMENT, "9001"),
            (Location.REVIEW_COMMENT, "9101"),
        ],
    )
    def test_noncontextual_carries_no_pr_fields(self, location, container_id):
        bundle = assemble_context(
            make_pr(), make_occ(location, container_id), make_page(), Strategy.NONCONTEXTUAL
        )
        assert bundle.pr_title == ""
        assert bundle.pr_description == ""
        assert bundle.repo_name == ""
        assert bundle.repo_description == ""
        assert bundle.located_body == ""
        assert bundle.page_body.startswith("Ten words")

    def test_metadata_carries_only_page_metadata(self):
        bundle = assemble_context(make_pr(), make_occ(), make_page(), Strategy.METADATA)
        assert bundle.page_title == "Guide title"
        assert bundle.page_meta_description == "Guide description."
        assert bundle.page_body == ""
        assert bundle.pr_title == ""

    def test_unresolvable_container_raises(self):
        occ = make_occ(Location.COMMENT, "nope")
        with pytest.raises(ContextError):
            assemble_context(make_pr(), occ, make_page(), Strategy.CONTEXTUAL)

    def test_page_body_truncated_to_budget(self):
        bundle = assemble_context(
            make_pr(), make_occ(), make_page(), Strategy.CONTEXTUAL, budget=5
        )
        assert bundle.truncated is True
        assert len(bundle.page_body.split()) == 5

    def test_truncated_flag_false_when_within_budget(self):
        bundle = assemble_context(
            make_pr(), make_occ(), make_page(), Strategy.NONCONTEXTUAL, budget=100
        )
        assert bundle.truncated is False


class TestBuildPrompt:
    def test_equal_bundles_equal_fingerprints(self):
        one = assemble_context(make_pr(), make_occ(), make_page(), Strategy.CONTEXTUAL)
        two = assemble_context(make_pr(), make_occ(), make_page(), Strategy.CONTEXTUAL)
        assert prompt_fingerprint(build_prompt(one)) == prompt_fingerprint(build_prompt(two))

    def test_noncontextual_prompt_has_no_pr_fields(self):
        bundle = assemble_context(make_pr(), make_occ(), make_page(), Strategy.NONCONTEXTUAL)
        prompt = build_prompt(bundle)
        assert "Document the new contrast tokens" not in prompt
        assert "octoworks/palette" not in prompt
        assert "Ten words of body text" in prompt

    def test_contextual_prompt_enumerates_fields(self):
        bundle = assemble_context(make_pr(), make_occ(), make_page(), Strategy.CONTEXTUAL)
        prompt = build_prompt(bundle)
        for expected in (
            "octoworks/palette",
            "Color utilities",
            "Document the new contrast tokens",
            "Description body with a link.",
            "an eight word label for the guide page",
            "Ten words of body text",
        ):
            assert expected in prompt
        assert "3 sentences" in prompt

    def test_empty_fields_render_placeholder(self):
        pr = make_pr(repo_description="")
        bundle = assemble_context(pr, make_occ(), make_page(), Strategy.CONTEXTUAL)
        assert "Repository description: (none)" in build_prompt(bundle)

    def test_metadata_strategy_rejected(self):
        bundle = assemble_context(make_pr(), make_occ(), make_page(), Strategy.METADATA)
        with pytest.raises(StrategyError):
            build_prompt(bundle)

    def test_noncontextual_fingerprint_ignores_pr_changes(self):
        base = assemble_context(make_pr(), make_occ(), make_page(), Strategy.NONCONTEXTUAL)
        changed = assemble_context(
            make_pr(title="A totally different title"),
            make_occ(),
            make_page(),
            Strategy.NONCONTEXTUAL,
        )
        assert build_prompt(base) == build_prompt(changed)

    def test_contextual_fingerprint_tracks_pr_title(self):
        base = assemble_context(make_pr(), make_occ(), make_page(), Strategy.CONTEXTUAL)
        changed = assemble_context(
            make_pr(title="A totally different title"),
            make_occ(),
            make_page(),
            Strategy.CONTEXTUAL,
        )
        assert build_prompt(base) != build_prompt(changed)


class TestSummarizeLlm:
    def test_mock_echo_contract(self):
        bundle = assemble_context(make_pr(), make_occ(), make_page(), Strategy.NONCONTEXTUAL)
        summary = summarize_llm(bundle, MockChatClient())
        assert summary.text.startswith("MOCK:")
        assert summary.model_id == "mock"
        assert summary.prompt_fingerprint == prompt_fingerprint(build_prompt(bundle))

    def test_empty_completion_raises(self):
        class EmptyClient:
            model = "empty"

            def complete(self, prompt):
                return "   "

        bundle = assemble_context(make_pr(), make_occ(), make_page(), Strategy.NONCONTEXTUAL)
        with pytest.raises(EmptyCompletionError):
            summarize_llm(bundle, EmptyClient())

    def test_deterministic_text_for_equal_bundles(self):
        bundle = assemble_context(make_pr(), make_occ(), make_page(), Strategy.CONTEXTUAL)
        a = summarize_llm(bundle, MockChatClient())
        b = summarize_llm(bundle, MockChatClient())
        assert a.text == b.text


class TestOpenAiChatClient:
    def _client(self, handler, **kwargs):
        return OpenAiChatClient(
            base_url="https://llm.example/v1",
            api_key="key",
            model="m1",
            transport=httpx.MockTransport(handler),
            **kwargs,
        )

    def test_sends_wire_contract_and_reads_content(self):
        seen = {}

        def handler(request):
            seen["json"] = request.read()
            seen["auth"] = request.headers.get("Authorization")
            seen["path"] = request.url.path
            return httpx.Response(
                200, json={"choices": [{"message": {"content": "summary text"}}]}
            )

        assert self._client(handler).complete("the prompt") == "summary text"
        import json

        payload = json.loads(seen["json"])
        assert payload == {
            "model": "m1",
            "messages": [{"role": "user", "content": "the prompt"}],
            "temperature": 0,
        }
        assert seen["auth"] == "Bearer key"
        assert seen["path"] == "/v1/chat/completions"

    def test_auth_error(self):
        client = self._client(lambda request: httpx.Response(401))
        with pytest.raises(LlmAuthError):
            client.complete("p")

    def test_rate_limit_carries_retry_after(self):
        def handler(request):
            return httpx.Response(429, headers={"Retry-After": "7"})

        with pytest.raises(LlmRateLimitError) as excinfo:
            self._client(handler).complete("p")
        assert excinfo.value.retry_after == 7.0


class TestSnippetMetadata:
    def test_title_and_description_joined(self):
        page = make_page(
            title="Bootstrap · Color modes",
            meta_description="Learn about color modes.",
        )
        assert (
            snippet_metadata(page).text
            == "Bootstrap · Color modes — Learn about color modes."
        )

    def test_og_description_fallback(self):
        page = make_page(title="", meta_description="", og_title="", og_description="D")
        assert snippet_metadata(page).text == "D"

    def test_standard_tag_preferred_over_og(self):
        page = make_page(title="T", og_title="OT", meta_description="", og_description="OD")
        assert snippet_metadata(page).text == "T — OD"

    def test_no_metadata_raises(self):
        page = make_page(title="", meta_description="", og_title="", og_description="")
        with pytest.raises(NoMetadataError):
            snippet_metadata(page)

    def test_model_id_and_fingerprint(self):
        summary = snippet_metadata(make_page())
        assert summary.model_id == "snippet"
        assert summary.prompt_fingerprint == ""
        assert summary.strategy is Strategy.METADATA


class TestSummarizeDispatch:
    def test_metadata_needs_no_client(self):
        bundle = assemble_context(make_pr(), make_occ(), make_page(), Strategy.METADATA)
        summary = summarize(bundle, make_page(), llm_client=None)
        assert summary.strategy is Strategy.METADATA

    def test_llm_strategy_without_client_raises(self):
        bundle = assemble_context(make_pr(), make_occ(), make_page(), Strategy.NONCONTEXTUAL)
        with pytest.raises(LlmAuthError):
            summarize(bundle, make_page(), llm_client=None)

    def test_cache_prevents_second_call(self, tmp_path):
        bundle = assemble_context(make_pr(), make_occ(), make_page(), Strategy.CONTEXTUAL)
        cache = SummaryCache(tmp_path)
        client = MockChatClient()
        first = summarize(bundle, make_page(), client, cache=cache)
        second = summarize(bundle, make_page(), client, cache=cache)
        assert client.calls == 1
        assert first.text == second.text
