"""Ranking quality measured as NDCG against a held-out year.

Gains are the held-out year's scores taken linearly; an item missing
from the truth contributes nothing. The ideal ordering for the same
truth normalizes the metric into [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .aggregate import AggregationSpec, RankList, run_aggregation
from .scoring import ScoreTable, drop_unknown


class ZeroIdealError(ValueError):
    """Truth with no positive relevance leaves NDCG undefined."""


class MissingTruthError(KeyError):
    """No ground truth was supplied for a venue under evaluation."""


@dataclass(frozen=True)
class GroundTruth:
    """Relevance per institution for one held-out year."""

    year: int
    relevance: dict[str, Fraction | float]

    def __post_init__(self) -> None:
        for institution, value in self.relevance.items():
            if value < 0:
                raise ValueError(f"negative relevance for {institution!r}")

    @classmethod
    def from_score_table(cls, table: ScoreTable) -> "GroundTruth":
        return cls(table.year, dict(drop_unknown(table).entries))


def _ranked_ids(ranking: RankList | Iterable[str]) -> list[str]:
    if isinstance(ranking, RankList):
        return ranking.ids()
    return list(ranking)


def dcg_at_k(ranking: RankList | Iterable[str], truth: GroundTruth, k: int) -> float:
    """Discounted cumulative gain of the first k predictions.

    Position i (1-based) contributes gain / log2(i + 1); rankings shorter
    than k simply stop early.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    gains = []
    for position, institution in enumerate(_ranked_ids(ranking)[:k], start=1):
        value = float(truth.relevance.get(institution, 0.0))
        if value:
            gains.append(value / math.log2(position + 1))
    return math.fsum(gains)


def ideal_dcg_at_k(truth: GroundTruth, k: int) -> float:
    """DCG of the best ordering the truth itself allows."""
    ordered = sorted(truth.relevance.items(), key=lambda kv: (-kv[1], kv[0]))
    return dcg_at_k([institution for institution, _ in ordered], truth, k)


def ndcg_at_k(ranking: RankList | Iterable[str], truth: GroundTruth, k: int) -> float:
    """Normalized DCG in [0, 1]; undefined (not 0) for all-zero truth."""
    ideal = ideal_dcg_at_k(truth, k)
    if ideal == 0:
        raise ZeroIdealError(
            f"year {truth.year}: no positive relevance, NDCG undefined"
        )
    return dcg_at_k(ranking, truth, k) / ideal


@dataclass(frozen=True)
class EvalRow:
    venue_id: str
    values: dict[str, float]
    winner: str


@dataclass(frozen=True)
class EvalReport:
    k: int
    rows: list[EvalRow]

    @property
    def method_labels(self) -> list[str]:
        return list(self.rows[0].values) if self.rows else []


def evaluate_protocol(
    tables_by_venue: Mapping[str, Sequence[ScoreTable]],
    truth_by_venue: Mapping[str, GroundTruth],
    specs: Sequence[AggregationSpec],
    k: int,
) -> EvalReport:
    """Aggregate each venue's training years with every spec and score it.

    The winner per venue is the method with the highest NDCG; exact ties
    go to the method listed first.
    """
    rows = []
    for venue_id, tables in tables_by_venue.items():
        if venue_id not in truth_by_venue:
            raise MissingTruthError(venue_id)
        truth = truth_by_venue[venue_id]
        values: dict[str, float] = {}
        for spec in specs:
            ranking = run_aggregation(spec, tables)
            values[spec.label] = ndcg_at_k(ranking, truth, k)
        winner = max(values, key=values.get)
        rows.append(EvalRow(venue_id, values, winner))
    return EvalReport(k, rows)


def render_report_text(report: EvalReport, title: str | None = None) -> str:
    """Lay the report out as an aligned text table, one venue per row.

    The winning value per venue is starred. Values print with three
    decimals.
    """
    labels = report.method_labels
    if title is None:
        venues = ", ".join(row.venue_id for row in report.rows)
        title = f"NDCG@{report.k} values for {venues}"
    header = ["Conf. Name"] + labels
    grid = [header]
    for row in report.rows:
        cells = [row.venue_id]
        for label in labels:
            mark = "*" if label == row.winner else ""
            cells.append(f"{mark}{row.values[label]:.3f}")
        grid.append(cells)
    widths = [max(len(line[col]) for line in grid) for col in range(len(header))]
    lines = [title]
    for line in grid:
        rendered = "  ".join(cell.ljust(width) for cell, width in zip(line, widths))
        lines.append(rendered.rstrip())
    return "\n".join(lines) + "\n"


def render_report_csv(report: EvalReport) -> str:
    lines = [f"venue,method,ndcg@{report.k}"]
    for row in report.rows:
        for label in report.method_labels:
            lines.append(f"{row.venue_id},{label},{row.values[label]!r}")
    return "\n".join(lines) + "\n"
