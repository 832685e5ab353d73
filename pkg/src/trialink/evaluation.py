"""Retrieval evaluation over a benchmark of registration-article links.

For each benchmark registration the target article is the first linked
report published strictly after the trial's completion date; registrations
with no such report are excluded and listed in the report rather than
silently dropped. Metrics follow the study protocol: median rank with IQR,
first-ranked proportion, recall@50, and the full recall@N curve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ingest import Article, Registration, ReportedLink
from .similarity import MethodConfig, UnrankableRegistrationError

QUARTILE_METHOD = "linear"  # interpolation between order statistics (type 7)

CONVENTIONS = {
    "quartiles": "linear interpolation between order statistics",
    "tie_break": "ascending numeric pmid",
    "zero_overlap": "candidates sharing no feature are ranked after scored ones "
    "(cosine 0, jaccard 1, euclidean from cached norms)",
}


@dataclass(frozen=True)
class Benchmark:
    """A named set of evaluation links (reported or manually curated)."""

    name: str
    links: tuple[ReportedLink, ...]
    kind: str = "reported"  # reported | curated

    def __post_init__(self):
        if self.kind not in ("reported", "curated"):
            raise ValueError(f"unknown benchmark kind: {self.kind!r}")

    def by_registration(self) -> dict[str, list[str]]:
        grouped: dict[str, list[str]] = {}
        for link in sorted(self.links):
            grouped.setdefault(link.nct_id, []).append(link.pmid)
        return grouped


@dataclass
class EvalReport:
    config: MethodConfig
    benchmark: str
    n_registrations: int
    median_rank: float
    iqr: tuple[float, float]
    first_ranked_pct: float
    recall_at_50_pct: float
    recall_curve: list[tuple[int, float]]
    excluded: list[tuple[str, str]]
    n_candidates: int
    ranks: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "benchmark": self.benchmark,
            "n_registrations": self.n_registrations,
            "n_candidates": self.n_candidates,
            "median_rank": self.median_rank,
            "iqr": list(self.iqr),
            "first_ranked_pct": self.first_ranked_pct,
            "recall_at_50_pct": self.recall_at_50_pct,
            "recall_curve": [[n, r] for n, r in self.recall_curve],
            "excluded": [[nct_id, reason] for nct_id, reason in self.excluded],
            "ranks": self.ranks,
            "conventions": CONVENTIONS,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def select_target(
    registration: Registration, linked_articles: Sequence[Article]
) -> tuple[str | None, str | None]:
    """Pick the evaluation target among a registration's linked articles.

    Returns (pmid, None) for the earliest post-completion report (ties by
    ascending pmid), or (None, reason) when the registration must be
    excluded.
    """
    if not linked_articles:
        return None, "no links"
    if registration.completion_date is None:
        return None, "missing completion_date"
    dated = [a for a in linked_articles if a.publication_date is not None]
    candidates = [a for a in dated if a.publication_date > registration.completion_date]
    if not candidates:
        if len(dated) < len(linked_articles):
            return None, "no post-completion link (some links undated)"
        return None, "no post-completion link"
    best = min(candidates, key=lambda a: (a.publication_date, int(a.pmid)))
    return best.pmid, None


def select_targets(
    benchmark: Benchmark,
    registrations: Mapping[str, Registration],
    articles: Mapping[str, Article],
) -> tuple[dict[str, str], list[tuple[str, str]]]:
    """Resolve one target pmid per benchmark registration."""
    targets: dict[str, str] = {}
    excluded: list[tuple[str, str]] = []
    for nct_id, pmids in benchmark.by_registration().items():
        registration = registrations.get(nct_id)
        if registration is None:
            excluded.append((nct_id, "registration not ingested"))
            continue
        linked = [articles[p] for p in pmids if p in articles]
        if len(linked) < len(pmids):
            missing = sorted(set(pmids) - set(articles))
            excluded.append((nct_id, f"linked articles not ingested: {','.join(missing)}"))
            continue
        pmid, reason = select_target(registration, linked)
        if pmid is None:
            excluded.append((nct_id, reason))
        else:
            targets[nct_id] = pmid
    return targets, excluded


def default_curve_grid(n_candidates: int, log_steps: int = 24) -> list[int]:
    """Every integer 1..100, then logarithmic steps up to the corpus size."""
    grid = set(range(1, min(100, n_candidates) + 1))
    if n_candidates > 100:
        for i in range(1, log_steps + 1):
            grid.add(round(100 * (n_candidates / 100) ** (i / log_steps)))
        grid.add(n_candidates)
    return sorted(grid)


def evaluate(
    benchmark: Benchmark,
    engine,
    config: MethodConfig,
    grid: Sequence[int] | None = None,
) -> EvalReport:
    """Rank every benchmark registration and aggregate the rank statistics."""
    targets, excluded = select_targets(
        benchmark,
        {r.nct_id: r for r in engine.registrations},
        {a.pmid: a for a in engine.articles},
    )
    n_candidates = len(engine.articles)
    ranks: dict[str, int] = {}
    for nct_id in sorted(targets):
        try:
            ranked = engine.rank(nct_id, config)
        except UnrankableRegistrationError:
            excluded.append((nct_id, "unrankable registration"))
            continue
        position = ranked.rank_of(targets[nct_id])
        if position is None:
            excluded.append((nct_id, "target not rankable"))
            continue
        ranks[nct_id] = position
    if not ranks:
        raise ValueError(f"benchmark {benchmark.name!r} is empty after exclusions")

    values = np.asarray(sorted(ranks.values()), dtype=np.float64)
    q1, median, q3 = np.percentile(values, [25, 50, 75], method=QUARTILE_METHOD)
    grid = list(grid) if grid is not None else default_curve_grid(n_candidates)
    curve = [(n, float(np.mean(values <= n))) for n in grid]
    return EvalReport(
        config=config,
        benchmark=benchmark.name,
        n_registrations=len(ranks),
        median_rank=float(median),
        iqr=(float(q1), float(q3)),
        first_ranked_pct=float(np.mean(values == 1) * 100.0),
        recall_at_50_pct=float(np.mean(values <= 50) * 100.0),
        recall_curve=curve,
        excluded=sorted(excluded),
        n_candidates=n_candidates,
        ranks=ranks,
    )


def recall_curve_rows(report: EvalReport) -> list[tuple[int, float, str]]:
    """Plot-ready (n, recall, marker) rows; n=1 and n=50 are marked."""
    markers = {1: "recall@1", 50: "recall@50"}
    return [(n, recall, markers.get(n, "")) for n, recall in report.recall_curve]


def write_recall_curve_csv(report: EvalReport, fh) -> None:
    fh.write("n,recall,marker\n")
    for n, recall, marker in recall_curve_rows(report):
        fh.write(f"{n},{recall!r},{marker}\n")


def format_results_table(reports: Iterable[EvalReport]) -> str:
    """Tab-separated summary mirroring the study's results-table layout.

    One block per representation and weighting scheme, one row per distance
    measure; columns are median rank (IQR), first-ranked %, and recall@50 %.
    """
    header = "representation\tscheme\tmeasure\tmedian_rank_iqr\tfirst_ranked_pct\trecall_at_50_pct"
    lines = [header]
    ordered = sorted(
        reports,
        key=lambda r: (
            ("term", "concept").index(r.config.representation),
            ("binary", "tfidf").index(r.config.scheme),
            ("euclidean_normalized", "jaccard", "cosine").index(r.config.measure),
        ),
    )
    for report in ordered:
        c = report.config
        median = _fmt_num(report.median_rank)
        q1, q3 = (_fmt_num(v) for v in report.iqr)
        lines.append(
            f"{c.representation}\t{c.scheme}\t{c.measure}\t"
            f"{median} ({q1}-{q3})\t"
            f"{report.first_ranked_pct:.1f}%\t{report.recall_at_50_pct:.1f}%"
        )
    return "\n".join(lines) + "\n"


def _fmt_num(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else f"{value:g}"
