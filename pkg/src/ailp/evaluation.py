"""Scoring protocol: each preview is scored against the link's own label,
averaged per project, then macro-averaged across projects into the final
three-column report.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from ailp.links import LinkOccurrence
from ailp.metrics import EmbeddingProvider, MetricError, MetricRow, score_summary
from ailp.pages import PageContent
from ailp.summarize import Strategy, Summary

logger = logging.getLogger(__name__)

STRATEGY_ORDER = (Strategy.CONTEXTUAL, Strategy.NONCONTEXTUAL, Strategy.METADATA)
STRATEGY_COLUMNS = {
    Strategy.CONTEXTUAL: "CLS",
    Strategy.NONCONTEXTUAL: "NCLS",
    Strategy.METADATA: "MBS",
}

# (report row label, MetricRow field) in presentation order.
REPORT_ROWS = (
    ("BLEU", "bleu"),
    ("METEOR", "meteor"),
    ("ROUGE 1", "rouge1"),
    ("ROUGE 2", "rouge2"),
    ("Sentence Similarity", "sent_sim"),
    ("Flesch Reading Ease", "flesch"),
    ("BERT precision", "bert_p"),
    ("BERT Recall", "bert_r"),
    ("BERT F1 score", "bert_f1"),
    ("Compression ratio", "compression"),
    ("Text relevance", "relevance"),
    ("Label compression ratio", "label_compression"),
)


@dataclass(frozen=True)
class LinkEvaluation:
    repo_full_name: str
    pr_number: int
    link_url: str
    reference_label: str
    rows: dict[Strategy, MetricRow]

    def as_dict(self) -> dict:
        return {
            "repo": self.repo_full_name,
            "pr": self.pr_number,
            "url": self.link_url,
            "reference": self.reference_label,
            "rows": {s.value: row.as_dict() for s, row in self.rows.items()},
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "LinkEvaluation":
        return cls(
            repo_full_name=raw["repo"],
            pr_number=int(raw["pr"]),
            link_url=raw["url"],
            reference_label=raw["reference"],
            rows={
                Strategy(name): MetricRow(**fields)
                for name, fields in raw["rows"].items()
            },
        )


@dataclass(frozen=True)
class ProjectAggregate:
    repo_full_name: str
    link_count: int
    means: dict[Strategy, MetricRow]


def evaluate_link(
    occ: LinkOccurrence,
    summaries: dict[Strategy, Summary],
    page: PageContent,
    provider: EmbeddingProvider,
    *,
    repo_full_name: str,
    pr_number: int,
) -> LinkEvaluation:
    """Score every produced summary against the label; failures drop the
    strategy from the result rather than zero-filling it."""
    rows: dict[Strategy, MetricRow] = {}
    for strategy, summary in summaries.items():
        try:
            rows[strategy] = score_summary(
                summary.text, occ.label, page.body_text, provider
            )
        except MetricError as exc:
            logger.warning(
                "skipping %s for %s#%s %s: %s",
                strategy.value,
                repo_full_name,
                pr_number,
                occ.url,
                exc,
            )
    return LinkEvaluation(
        repo_full_name=repo_full_name,
        pr_number=pr_number,
        link_url=occ.url,
        reference_label=occ.label,
        rows=rows,
    )


def _mean_rows(rows: list[MetricRow]) -> MetricRow:
    n = len(rows)
    return MetricRow(
        **{
            name: sum(getattr(row, name) for row in rows) / n
            for name in MetricRow.__dataclass_fields__
        }
    )


def aggregate(
    evaluations: list[LinkEvaluation],
) -> tuple[list[ProjectAggregate], dict[Strategy, MetricRow]]:
    """Per-project means plus the macro average across projects."""
    by_repo: dict[str, list[LinkEvaluation]] = {}
    for evaluation in evaluations:
        by_repo.setdefault(evaluation.repo_full_name, []).append(evaluation)

    projects = []
    for repo in sorted(by_repo):
        evals = by_repo[repo]
        means = {}
        for strategy in STRATEGY_ORDER:
            rows = [e.rows[strategy] for e in evals if strategy in e.rows]
            if rows:
                means[strategy] = _mean_rows(rows)
        projects.append(
            ProjectAggregate(repo_full_name=repo, link_count=len(evals), means=means)
        )

    return projects, grand_means(projects)


def grand_means(aggregates: list[ProjectAggregate]) -> dict[Strategy, MetricRow]:
    """Unweighted mean of the per-project means, per strategy."""
    grand: dict[Strategy, MetricRow] = {}
    for strategy in STRATEGY_ORDER:
        per_project = [p.means[strategy] for p in aggregates if strategy in p.means]
        if per_project:
            grand[strategy] = _mean_rows(per_project)
    return grand


def render_report(aggregates: list[ProjectAggregate], format: str = "markdown") -> str:
    """Grand-mean matrix (metrics by strategy) in the requested format."""
    if format not in ("markdown", "csv", "json"):
        raise ValueError(f"unknown report format: {format}")
    grand = grand_means(aggregates)
    if format == "json":
        return _render_json(aggregates, grand)
    if format == "csv":
        return _render_csv(grand)
    return _render_markdown(aggregates, grand)


def _cell(grand: dict[Strategy, MetricRow], strategy: Strategy, field: str) -> str:
    if strategy not in grand:
        return "n/a"
    return f"{getattr(grand[strategy], field):.2f}"


def _render_markdown(
    aggregates: list[ProjectAggregate], grand: dict[Strategy, MetricRow]
) -> str:
    lines = [
        "# Link preview evaluation report",
        "",
        f"- Projects: {len(aggregates)}",
        f"- Links evaluated: {sum(p.link_count for p in aggregates)}",
        "- Averaging: macro (per-project means averaged across projects)",
        "",
        "| Metric | CLS | NCLS | MBS |",
        "| --- | --- | --- | --- |",
    ]
    for label, field in REPORT_ROWS:
        cells = " | ".join(_cell(grand, s, field) for s in STRATEGY_ORDER)
        lines.append(f"| {label} | {cells} |")
    lines.append("")
    return "\n".join(lines)


def _render_csv(grand: dict[Strategy, MetricRow]) -> str:
    lines = ["metric,CLS,NCLS,MBS"]
    for label, field in REPORT_ROWS:
        cells = ",".join(
            "" if s not in grand else f"{getattr(grand[s], field):.2f}"
            for s in STRATEGY_ORDER
        )
        lines.append(f'"{label}",{cells}')
    return "\n".join(lines) + "\n"


def _render_json(
    aggregates: list[ProjectAggregate], grand: dict[Strategy, MetricRow]
) -> str:
    document = {
        "averaging": "macro",
        "projects": [
            {
                "repo": p.repo_full_name,
                "link_count": p.link_count,
                "means": {s.value: row.as_dict() for s, row in p.means.items()},
            }
            for p in aggregates
        ],
        "grand_means": {s.value: row.as_dict() for s, row in grand.items()},
    }
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def aggregates_from_report_json(document: str) -> list[ProjectAggregate]:
    """Inverse of the JSON report: recovers the project aggregates."""
    raw = json.loads(document)
    return [
        ProjectAggregate(
            repo_full_name=entry["repo"],
            link_count=int(entry["link_count"]),
            means={
                Strategy(name): MetricRow(**fields)
                for name, fields in entry["means"].items()
            },
        )
        for entry in raw["projects"]
    ]
