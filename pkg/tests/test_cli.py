"""End-to-end pipeline through the command line, against fixtures."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from ailp.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


def run_pipeline(runner, fixture_dir, work: Path, repos=(("octoworks/palette", True),)):
    """harvest -> summarize -> evaluate -> report inside work; returns paths."""
    links = work / "links.jsonl"
    base = [
        "--fixture-dir", str(fixture_dir),
        "--cache-dir", str(work / "cache"),
        "--mock-llm",
    ]
    merged_links = []
    for repo, _all in repos:
        out = work / f"links-{repo.replace('/', '-')}.jsonl"
        result = runner.invoke(
            main, [*base, "harvest", repo, "--all", "-o", str(out)]
        )
        assert result.exit_code == 0, result.output
        merged_links.append(out.read_text())
    links.write_text("".join(merged_links))

    summaries = work / "summaries.jsonl"
    result = runner.invoke(
        main, [*base, "summarize", str(links), "-o", str(summaries)]
    )
    assert result.exit_code == 0, result.output

    evaluations = work / "evaluations.jsonl"
    result = runner.invoke(
        main, [*base, "evaluate", str(summaries), "-o", str(evaluations)]
    )
    assert result.exit_code == 0, result.output

    result = runner.invoke(
        main,
        [*base, "report", str(evaluations), "--format", "markdown", "-o", str(work)],
    )
    assert result.exit_code == 0, result.output
    return links, summaries, evaluations, work / "report.md"


class TestCurate:
    def test_ten_candidate_fixture(self, runner, data_dir, tmp_path):
        out = tmp_path / "curated.jsonl"
        result = runner.invoke(
            main,
            [
                "curate", str(data_dir / "candidates.jsonl"),
                "--cutoff", "2024-05-27", "-o", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        assert "retained 1/10" in result.output
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert [l["full_name"] for l in lines] == ["keep/boundary-pass"]

    def test_empty_file(self, runner, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        out = tmp_path / "curated.jsonl"
        result = runner.invoke(main, ["curate", str(empty), "-o", str(out)])
        assert result.exit_code == 0
        assert out.read_text() == ""

    def test_malformed_line_names_line_number(self, runner, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"full_name": "a/a", "stars": 1}\n')
        result = runner.invoke(main, ["curate", str(bad)])
        assert result.exit_code != 0
        assert ":1:" in result.output

    def test_top_truncation(self, runner, tmp_path):
        lines = []
        for i in range(5):
            lines.append(
                json.dumps(
                    {
                        "full_name": f"repo/r{i}",
                        "stars": 100 - i,
                        "commit_count": 100,
                        "issue_count": 1,
                        "contributor_count": 3,
                        "pr_count": 100,
                        "release_count": 1,
                        "last_commit_at": "2024-06-01T00:00:00Z",
                        "is_fork": False,
                    }
                )
            )
        src = tmp_path / "cands.jsonl"
        src.write_text("\n".join(lines) + "\n")
        out = tmp_path / "curated.jsonl"
        result = runner.invoke(
            main, ["curate", str(src), "--top", "2", "-o", str(out)]
        )
        assert result.exit_code == 0
        assert len(out.read_text().splitlines()) == 2


class TestHarvest:
    def test_all_flag_for_fixture_repo(self, runner, fixture_dir, tmp_path):
        out = tmp_path / "links.jsonl"
        result = runner.invoke(
            main,
            [
                "--fixture-dir", str(fixture_dir),
                "harvest", "octoworks/palette", "--all", "-o", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        rows = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(rows) == 6
        assert {r["pr"] for r in rows} == {101, 102}
        assert all(r["word_count"] >= 8 for r in rows)

    def test_all_without_fixtures_fails(self, runner):
        result = runner.invoke(main, ["harvest", "octoworks/palette", "--all"])
        assert result.exit_code != 0

    def test_specific_pr(self, runner, fixture_dir, tmp_path):
        out = tmp_path / "links.jsonl"
        result = runner.invoke(
            main,
            [
                "--fixture-dir", str(fixture_dir),
                "harvest", "meshlab/gridkit", "--pr", "7", "-o", str(out),
            ],
        )
        assert result.exit_code == 0
        rows = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(rows) == 2
        assert {r["location"] for r in rows} == {"description", "review_comment"}


class TestSummarizeCommand:
    def test_requires_key_or_mock(self, runner, fixture_dir, tmp_path, monkeypatch):
        monkeypatch.delenv("AILP_LLM_API_KEY", raising=False)
        links = tmp_path / "links.jsonl"
        links.write_text("")
        result = runner.invoke(
            main, ["--fixture-dir", str(fixture_dir), "summarize", str(links)]
        )
        assert result.exit_code != 0
        assert "AILP_LLM_API_KEY" in result.output

    def test_metadata_only_needs_no_key(self, runner, fixture_dir, tmp_path, monkeypatch):
        monkeypatch.delenv("AILP_LLM_API_KEY", raising=False)
        links = tmp_path / "links.jsonl"
        links.write_text("")
        result = runner.invoke(
            main,
            [
                "--fixture-dir", str(fixture_dir),
                "--cache-dir", str(tmp_path / "cache"),
                "summarize", str(links), "--strategy", "metadata",
                "-o", str(tmp_path / "summaries.jsonl"),
            ],
        )
        assert result.exit_code == 0, result.output


class TestPipeline:
    def test_full_run_produces_report(self, runner, fixture_dir, tmp_path):
        repos = [("octoworks/palette", True), ("meshlab/gridkit", True)]
        links, summaries, evaluations, report = run_pipeline(
            runner, fixture_dir, tmp_path, repos
        )
        link_rows = [json.loads(l) for l in links.read_text().splitlines()]
        assert len(link_rows) == 8
        summary_rows = [json.loads(l) for l in summaries.read_text().splitlines()]
        # 8 links x 3 strategies, minus the one page with no metadata.
        assert len(summary_rows) == 23
        eval_rows = [json.loads(l) for l in evaluations.read_text().splitlines()]
        assert len(eval_rows) == 8
        text = report.read_text()
        assert "| Metric | CLS | NCLS | MBS |" in text
        assert (tmp_path / "projects.jsonl").exists()

    def test_stages_are_idempotent(self, runner, fixture_dir, tmp_path):
        work1 = tmp_path / "one"
        work2 = tmp_path / "two"
        work1.mkdir()
        work2.mkdir()
        repos = [("octoworks/palette", True), ("meshlab/gridkit", True)]
        outputs1 = run_pipeline(runner, fixture_dir, work1, repos)
        outputs2 = run_pipeline(runner, fixture_dir, work2, repos)
        for a, b in zip(outputs1, outputs2):
            assert a.read_bytes() == b.read_bytes()

    def test_report_on_empty_evaluations(self, runner, tmp_path):
        empty = tmp_path / "evaluations.jsonl"
        empty.write_text("")
        result = runner.invoke(
            main, ["report", str(empty), "-o", str(tmp_path)]
        )
        assert result.exit_code == 0
        assert "| Metric | CLS | NCLS | MBS |" in (tmp_path / "report.md").read_text()

    def test_json_report_format(self, runner, fixture_dir, tmp_path):
        _, _, evaluations, _ = run_pipeline(runner, fixture_dir, tmp_path)
        result = runner.invoke(
            main,
            ["report", str(evaluations), "--format", "json", "-o", str(tmp_path)],
        )
        assert result.exit_code == 0
        parsed = json.loads((tmp_path / "report.json").read_text())
        assert "grand_means" in parsed


class TestHelpAndFlags:
    @pytest.mark.parametrize(
        "command",
        [[], ["curate"], ["harvest"], ["summarize"], ["evaluate"], ["report"], ["serve"]],
    )
    def test_help_available(self, runner, command):
        result = runner.invoke(main, [*command, "--help"])
        assert result.exit_code == 0
        assert "Usage" in result.output

    def test_unknown_flag_fails(self, runner):
        result = runner.invoke(main, ["curate", "--bogus"])
        assert result.exit_code != 0
