"""Pipeline commands: curate, harvest, summarize, evaluate, report, serve.

Each batch stage reads the previous stage's JSON-lines file and writes its
own, so runs are resumable and re-runnable; under fixtures and the mock
LLM every stage is byte-deterministic.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from ailp import __version__
from ailp.config import ENV_LLM_API_KEY, RunConfig
from ailp.evaluation import (
    LinkEvaluation,
    aggregate,
    evaluate_link,
    render_report,
)
from ailp.github import (
    GitHubClient,
    GitHubError,
    PrRecord,
    RepoCandidate,
    curate_repositories,
    harvest_links,
)
from ailp.links import LinkKind, LinkOccurrence, Location
from ailp.metrics import HashEmbeddingProvider
from ailp.pages import (
    FetchPolicy,
    PageCache,
    PageFetchError,
    PageFetcher,
    PageFixtures,
)
from ailp.summarize import (
    ContextError,
    LlmAuthError,
    LlmError,
    MockChatClient,
    NoMetadataError,
    OpenAiChatClient,
    Strategy,
    Summary,
    SummaryCache,
    assemble_context,
    summarize,
)
from ailp.util import EPOCH, format_utc, parse_utc, read_jsonl, write_jsonl

_STRATEGY_CHOICES = [s.value for s in Strategy]


def _load_config(ctx: click.Context) -> RunConfig:
    params = ctx.obj or {}
    return RunConfig.load(
        params.get("config"),
        fixture_dir=params.get("fixture_dir"),
        cache_dir=params.get("cache_dir"),
        mock_llm=params.get("mock_llm") or None,
    )


def _github_client(config: RunConfig) -> GitHubClient:
    return GitHubClient(
        auth_token=config.github_token,
        fixture_dir=config.pr_fixture_dir,
        concurrency=config.github_concurrency,
    )


def _page_fetcher(config: RunConfig) -> PageFetcher:
    fixtures = (
        PageFixtures(config.page_fixture_dir)
        if config.page_fixture_dir is not None
        else None
    )
    return PageFetcher(
        policy=FetchPolicy(),
        cache=PageCache(Path(config.cache_dir) / "pages"),
        fixtures=fixtures,
        max_in_flight=config.fetch_concurrency,
    )


def _chat_client(config: RunConfig, needs_llm: bool):
    if config.mock_llm:
        return MockChatClient()
    if config.llm_api_key:
        return OpenAiChatClient(
            base_url=config.llm_base_url,
            api_key=config.llm_api_key,
            model=config.llm_model,
            max_concurrency=config.llm_concurrency,
        )
    if needs_llm:
        raise click.ClickException(
            "LLM strategies need an API key: set "
            f"{ENV_LLM_API_KEY} or pass --mock-llm"
        )
    return None


@click.group()
@click.version_option(version=__version__)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option(
    "--fixture-dir",
    type=click.Path(exists=True, file_okay=False),
    default=None,
    help="Serve GitHub and page data from stored fixtures instead of the network.",
)
@click.option("--cache-dir", type=click.Path(file_okay=False), default=None)
@click.option("--mock-llm", is_flag=True, help="Use the deterministic mock LLM client.")
@click.pass_context
def main(ctx: click.Context, config, fixture_dir, cache_dir, mock_llm) -> None:
    """Link previews for pull-request review: batch pipeline and local service."""
    ctx.obj = {
        "config": config,
        "fixture_dir": fixture_dir,
        "cache_dir": cache_dir,
        "mock_llm": mock_llm,
    }


@main.command()
@click.argument("candidates_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--cutoff", default=None, help="Last-commit cutoff (ISO date).")
@click.option("--top", type=int, default=None, help="Keep only the first N survivors.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default="curated.jsonl")
@click.pass_context
def curate(ctx, candidates_file, cutoff, top, output) -> None:
    """Filter repository candidates and sort survivors by stars."""
    config = _load_config(ctx)
    cutoff_date = config.cutoff_date
    if cutoff is not None:
        cutoff_date = parse_utc(cutoff if "T" in cutoff else f"{cutoff}T00:00:00+00:00")
    candidates = []
    for lineno, raw in read_jsonl(candidates_file):
        try:
            candidates.append(RepoCandidate.from_dict(raw))
        except (KeyError, ValueError, TypeError) as exc:
            raise click.ClickException(
                f"{candidates_file}:{lineno}: malformed candidate: {exc}"
            )
    curated = curate_repositories(candidates, cutoff_date)
    if top is not None:
        curated = curated[:top]
    write_jsonl(
        output,
        (
            {
                "full_name": c.full_name,
                "stars": c.stars,
                "commit_count": c.commit_count,
                "issue_count": c.issue_count,
                "contributor_count": c.contributor_count,
                "pr_count": c.pr_count,
                "release_count": c.release_count,
                "last_commit_at": format_utc(c.last_commit_at),
                "is_fork": c.is_fork,
            }
            for c in curated
        ),
    )
    click.echo(f"retained {len(curated)}/{len(candidates)} candidates -> {output}")


def _occurrence_record(repo: str, pr: int, occ: LinkOccurrence) -> dict:
    return {
        "repo": repo,
        "pr": pr,
        "url": occ.url,
        "label": occ.label,
        "location": occ.location.value,
        "container_id": occ.container_id,
        "span": list(occ.char_span),
        "kind": occ.link_kind.value,
        "word_count": occ.label_word_count,
    }


def _occurrence_from_record(raw: dict) -> LinkOccurrence:
    return LinkOccurrence(
        url=raw["url"],
        label=raw["label"],
        location=Location(raw["location"]),
        container_id=raw["container_id"],
        char_span=tuple(raw.get("span", (0, 0))),
        link_kind=LinkKind(raw.get("kind", "external")),
        label_word_count=raw.get("word_count", len(raw["label"].split())),
    )


@main.command()
@click.argument("repo")
@click.option("--pr", "pr_numbers", type=int, multiple=True, help="PR number; repeatable.")
@click.option("--all", "fetch_all", is_flag=True, help="All fixture PRs for the repo.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default="links.jsonl")
@click.pass_context
def harvest(ctx, repo, pr_numbers, fetch_all, output) -> None:
    """Extract qualifying Markdown links from pull requests."""
    config = _load_config(ctx)
    client = _github_client(config)
    numbers = list(pr_numbers)
    if fetch_all:
        if config.fixture_dir is None:
            raise click.ClickException("--all requires --fixture-dir")
        numbers = client.list_fixture_prs(repo)
    if not numbers:
        raise click.ClickException("no PR numbers given (use --pr or --all)")
    try:
        records = client.fetch_prs(repo, numbers)
    except GitHubError as exc:
        raise click.ClickException(str(exc))
    rows = []
    for record in records:
        for occ in harvest_links(record, min_words=config.min_label_words):
            rows.append(_occurrence_record(record.repo_full_name, record.pr_number, occ))
    count = write_jsonl(output, rows)
    click.echo(f"harvested {count} links from {len(records)} PRs -> {output}")


@main.command("summarize")
@click.argument("links_file", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--strategy",
    "strategies",
    type=click.Choice(_STRATEGY_CHOICES),
    multiple=True,
    help="Strategy to run; repeatable (default: all three).",
)
@click.option("-o", "--output", type=click.Path(dir_okay=False), default="summaries.jsonl")
@click.pass_context
def summarize_cmd(ctx, links_file, strategies, output) -> None:
    """Generate previews for harvested links with the selected strategies."""
    config = _load_config(ctx)
    chosen = [Strategy(s) for s in (strategies or config.strategies)]
    needs_llm = any(s is not Strategy.METADATA for s in chosen)
    chat_client = _chat_client(config, needs_llm)
    client = _github_client(config)
    fetcher = _page_fetcher(config)
    summary_cache = SummaryCache(Path(config.cache_dir) / "summaries")

    pr_memo: dict[tuple[str, int], PrRecord] = {}
    rows = []
    failures = 0
    for lineno, raw in read_jsonl(links_file):
        try:
            occ = _occurrence_from_record(raw)
            repo, pr_number = raw["repo"], int(raw["pr"])
        except (KeyError, ValueError, TypeError) as exc:
            raise click.ClickException(f"{links_file}:{lineno}: malformed link: {exc}")
        try:
            page = fetcher.fetch(occ.url)
        except PageFetchError as exc:
            click.echo(f"warning: skipping {occ.url}: {exc}", err=True)
            failures += 1
            continue
        key = (repo, pr_number)
        if key not in pr_memo:
            try:
                pr_memo[key] = client.fetch_pr(repo, pr_number)
            except GitHubError as exc:
                raise click.ClickException(f"cannot fetch {repo}#{pr_number}: {exc}")
        record = pr_memo[key]
        for strategy in chosen:
            try:
                bundle = assemble_context(
                    record, occ, page, strategy, budget=config.page_budget_words
                )
                summary = summarize(bundle, page, chat_client, cache=summary_cache)
            except NoMetadataError:
                continue
            except ContextError as exc:
                click.echo(
                    f"warning: {strategy.value} failed for {occ.url}: {exc}", err=True
                )
                failures += 1
                continue
            except LlmAuthError as exc:
                raise click.ClickException(f"LLM authentication failed: {exc}")
            except LlmError as exc:
                click.echo(
                    f"warning: {strategy.value} failed for {occ.url}: {exc}", err=True
                )
                failures += 1
                continue
            rows.append(
                {
                    **_occurrence_record(repo, pr_number, occ),
                    "strategy": strategy.value,
                    "text": summary.text,
                    "model_id": summary.model_id,
                    "fingerprint": summary.prompt_fingerprint,
                }
            )
    count = write_jsonl(output, rows)
    click.echo(f"wrote {count} summaries ({failures} failures) -> {output}")


@main.command()
@click.argument("summaries_file", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", type=click.Path(dir_okay=False), default="evaluations.jsonl")
@click.pass_context
def evaluate(ctx, summaries_file, output) -> None:
    """Score summaries against link labels and page bodies."""
    config = _load_config(ctx)
    fetcher = _page_fetcher(config)
    provider = HashEmbeddingProvider()

    grouped: dict[tuple, dict] = {}
    for lineno, raw in read_jsonl(summaries_file):
        try:
            key = (raw["repo"], int(raw["pr"]), raw["url"], raw["label"])
            entry = grouped.setdefault(key, {"raw": raw, "summaries": {}})
            entry["summaries"][Strategy(raw["strategy"])] = Summary(
                strategy=Strategy(raw["strategy"]),
                text=raw["text"],
                model_id=raw.get("model_id", ""),
                prompt_fingerprint=raw.get("fingerprint", ""),
                created_at=EPOCH,
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise click.ClickException(
                f"{summaries_file}:{lineno}: malformed summary: {exc}"
            )

    evaluations = []
    for (repo, pr_number, url, _label), entry in grouped.items():
        occ = _occurrence_from_record(entry["raw"])
        try:
            page = fetcher.fetch(url)
        except PageFetchError as exc:
            click.echo(f"warning: skipping {url}: {exc}", err=True)
            continue
        evaluation = evaluate_link(
            occ,
            entry["summaries"],
            page,
            provider,
            repo_full_name=repo,
            pr_number=pr_number,
        )
        if evaluation.rows:
            evaluations.append(evaluation)
    count = write_jsonl(output, (e.as_dict() for e in evaluations))
    click.echo(f"wrote {count} evaluations -> {output}")


@main.command()
@click.argument("evaluations_file", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["markdown", "csv", "json"]),
    default="markdown",
)
@click.option("-o", "--output-dir", type=click.Path(file_okay=False), default=".")
@click.pass_context
def report(ctx, evaluations_file, fmt, output_dir) -> None:
    """Aggregate evaluations into the metric-by-strategy report."""
    evaluations = []
    for lineno, raw in read_jsonl(evaluations_file):
        try:
            evaluations.append(LinkEvaluation.from_dict(raw))
        except (KeyError, ValueError, TypeError) as exc:
            raise click.ClickException(
                f"{evaluations_file}:{lineno}: malformed evaluation: {exc}"
            )
    projects, _ = aggregate(evaluations)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    extension = {"markdown": "md", "csv": "csv", "json": "json"}[fmt]
    report_path = out / f"report.{extension}"
    report_path.write_text(render_report(projects, fmt), encoding="utf-8")
    write_jsonl(
        out / "projects.jsonl",
        (
            {
                "repo": p.repo_full_name,
                "link_count": p.link_count,
                "means": {s.value: row.as_dict() for s, row in p.means.items()},
            }
            for p in projects
        ),
    )
    click.echo(f"wrote {report_path} and {out / 'projects.jsonl'}")


@main.command()
@click.option("--port", type=int, default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.pass_context
def serve(ctx, port, host) -> None:
    """Run the local preview service the browser extension talks to."""
    import uvicorn

    from ailp.service import create_app

    config = _load_config(ctx)
    uvicorn.run(create_app(config), host=host, port=port or config.port)


if __name__ == "__main__":
    sys.exit(main())
