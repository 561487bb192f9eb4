"""Consensus rankings from per-year score tables.

Three aggregation families are provided: a normalized score sum over the
years, positional (Borda-style) point counts with several combining
variants, and Fagin-style top-k retrieval that avoids scoring the whole
universe. All of them break score ties by institution id ascending, so
every output is deterministic.
"""

from __future__ import annotations

import heapq
import json
import math
import statistics
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, NamedTuple, Sequence

from .scoring import ScoreTable, drop_unknown, normalize

HIGHER_IS_BETTER = "higher_is_better"
LOWER_IS_BETTER = "lower_is_better"

METHOD_NORMALIZED_SUM = "normalized_sum"
METHOD_BORDA = "borda"
METHOD_FAGIN = "fagin"
METHODS = (METHOD_NORMALIZED_SUM, METHOD_BORDA, METHOD_FAGIN)

BORDA_VARIANTS = ("sum", "median", "geometric_mean", "p_norm")

DEFAULT_TOP_K = 20


class NotFullListsError(ValueError):
    """Fagin requires every list to rank the same item universe."""


class KTooLargeError(ValueError):
    """Requested more items than the universe holds."""


class InvalidPError(ValueError):
    """The p-norm exponent must be a real number > 0."""


class RankedItem(NamedTuple):
    rank: int
    institution_id: str
    score: Fraction | float


@dataclass(frozen=True)
class RankList:
    """Items in rank order 1..n, scores non-increasing, ids unique."""

    label: str
    items: tuple[RankedItem, ...]

    def ids(self) -> list[str]:
        return [item.institution_id for item in self.items]


@dataclass(frozen=True)
class FinalScoreTable:
    """Aggregated values over all years, plus which direction wins."""

    entries: dict[str, Fraction | float]
    direction: str = HIGHER_IS_BETTER


@dataclass(frozen=True)
class AggregationSpec:
    """A parsed choice of aggregation method.

    ``borda_variant`` and ``p`` apply only to the borda method; ``fagin_k``
    only to fagin, defaulting to the usual top-20 cutoff.
    """

    method: str
    borda_variant: str = "sum"
    p: float | None = None
    fagin_k: int | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown aggregation method {self.method!r}")
        if self.borda_variant not in BORDA_VARIANTS:
            raise ValueError(f"unknown borda variant {self.borda_variant!r}")
        if self.borda_variant == "p_norm" and self.method == METHOD_BORDA:
            if self.p is None or not self.p > 0:
                raise InvalidPError(f"p must be > 0, got {self.p!r}")
        if self.method == METHOD_FAGIN:
            if self.fagin_k is None:
                object.__setattr__(self, "fagin_k", DEFAULT_TOP_K)
            elif self.fagin_k < 1:
                raise ValueError(f"fagin_k must be >= 1, got {self.fagin_k}")

    @property
    def label(self) -> str:
        if self.method == METHOD_BORDA:
            if self.borda_variant == "p_norm":
                return f"borda_p_norm_{self.p:g}"
            return f"borda_{self.borda_variant}"
        return self.method

    @classmethod
    def parse(cls, text: str) -> "AggregationSpec":
        """Parse specs like ``borda:median``, ``borda:p_norm:2`` or ``fagin:50``."""
        parts = text.strip().split(":")
        name = parts[0]
        if name == METHOD_NORMALIZED_SUM:
            if len(parts) > 1:
                raise ValueError(f"{name} takes no arguments: {text!r}")
            return cls(METHOD_NORMALIZED_SUM)
        if name == METHOD_BORDA:
            variant = parts[1] if len(parts) > 1 else "sum"
            if variant == "p_norm":
                if len(parts) != 3:
                    raise ValueError(f"p_norm needs an exponent: {text!r}")
                return cls(METHOD_BORDA, "p_norm", p=float(parts[2]))
            if len(parts) > 2:
                raise ValueError(f"unexpected argument in {text!r}")
            return cls(METHOD_BORDA, variant)
        if name == METHOD_FAGIN:
            if len(parts) == 1:
                return cls(METHOD_FAGIN)
            if len(parts) == 2:
                return cls(METHOD_FAGIN, fagin_k=int(parts[1]))
            raise ValueError(f"unexpected argument in {text!r}")
        raise ValueError(f"unknown aggregation method {name!r}")


def to_ranking(
    table: ScoreTable | FinalScoreTable, label: str | None = None
) -> RankList:
    """Order a table into ranks 1..n, breaking score ties by id ascending.

    Year tables always rank higher scores first and shed the UNKNOWN
    sentinel; aggregated tables follow their own direction.
    """
    if isinstance(table, ScoreTable):
        entries: Mapping[str, Fraction | float] = drop_unknown(table).entries
        direction = HIGHER_IS_BETTER
        if label is None:
            label = str(table.year)
    else:
        entries = table.entries
        direction = table.direction
        if label is None:
            label = "aggregate"
    if direction == HIGHER_IS_BETTER:
        ordered = sorted(entries.items(), key=lambda kv: (-kv[1], kv[0]))
    else:
        ordered = sorted(entries.items(), key=lambda kv: (kv[1], kv[0]))
    items = tuple(
        RankedItem(position, institution, score)
        for position, (institution, score) in enumerate(ordered, start=1)
    )
    return RankList(label, items)


def normalized_sum(tables: Sequence[ScoreTable]) -> FinalScoreTable:
    """Sum each institution's scores after scaling every year's maximum to 1.

    Years where an institution is absent contribute nothing. Arithmetic
    is exact, so rescaling any year's raw scores by a positive constant
    leaves the result bit-identical. Empty or all-zero years carry no
    scale and are skipped.
    """
    totals: dict[str, Fraction] = {}
    for table in tables:
        visible = drop_unknown(table)
        for institution in visible.entries:
            totals.setdefault(institution, Fraction(0))
        if not visible.entries:
            continue
        top = max(visible.entries.values())
        if top == 0:
            continue
        top = Fraction(top)
        for institution, amount in visible.entries.items():
            totals[institution] += Fraction(amount) / top
    return FinalScoreTable(dict(sorted(totals.items())), HIGHER_IS_BETTER)


def borda_scores(rank_list: RankList) -> dict[str, int]:
    """Positional points for one list: n for rank 1 down to 1 for rank n."""
    n = len(rank_list.items)
    return {item.institution_id: n - item.rank + 1 for item in rank_list.items}


def borda_aggregate(
    rank_lists: Sequence[RankList],
    variant: str = "sum",
    p: float | None = None,
) -> FinalScoreTable:
    """Combine per-list positional points across lists.

    Institutions absent from a list take 0 points there. Variants:

    - ``sum``: total points (the classic count).
    - ``median``: median of the per-list points.
    - ``geometric_mean``: L-th root of the product; any absence zeroes it.
    - ``p_norm``: mean of the points raised to ``p``; at p=1 this is the
      sum scaled by 1/L, so it orders identically to ``sum``.

    Point values are small integers and float reductions go through
    ``math.fsum``, so results do not depend on list order.
    """
    if not rank_lists:
        raise ValueError("no rank lists to aggregate")
    if variant not in BORDA_VARIANTS:
        raise ValueError(f"unknown borda variant {variant!r}")
    if variant == "p_norm" and (p is None or not p > 0):
        raise InvalidPError(f"p must be > 0, got {p!r}")
    points = [borda_scores(rl) for rl in rank_lists]
    universe = sorted({institution for pts in points for institution in pts})
    count = len(rank_lists)
    entries: dict[str, Fraction | float] = {}
    for institution in universe:
        values = [pts.get(institution, 0) for pts in points]
        if variant == "sum":
            entries[institution] = Fraction(sum(values))
        elif variant == "median":
            entries[institution] = statistics.median(values)
        elif variant == "geometric_mean":
            if any(v == 0 for v in values):
                entries[institution] = 0.0
            else:
                entries[institution] = math.exp(
                    math.fsum(math.log(v) for v in values) / count
                )
        else:
            entries[institution] = (
                math.fsum(float(v) ** p for v in values) / count
            )
    return FinalScoreTable(entries, HIGHER_IS_BETTER)


def _mean_score(values: list[float]) -> float:
    # fsum makes the reduction independent of list order.
    return math.fsum(values) / len(values)


def fagin_topk(rank_lists: Sequence[RankList], k: int) -> RankList:
    """Top k institutions by mean score without evaluating the whole universe.

    All lists must rank the same universe, each sorted by its own scores.
    Sorted access walks every list in parallel, one depth per round;
    random access fills in the scores of anything seen. The walk stops
    once k items have appeared in every list and no unseen item could
    still reach the current k-th best mean (any unseen item is bounded by
    the mean of the scores at the current depth). That guard keeps the
    result identical to brute force even when means tie across different
    score profiles.

    Returns ranks 1..k by mean descending, id ascending.
    """
    if not rank_lists:
        raise ValueError("no rank lists given")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    universe = {item.institution_id for item in rank_lists[0].items}
    by_list: list[dict[str, float]] = []
    for rank_list in rank_lists:
        scores = {item.institution_id: float(item.score) for item in rank_list.items}
        if set(scores) != universe:
            raise NotFullListsError(
                f"list {rank_list.label!r} does not rank the full universe"
            )
        by_list.append(scores)
    n = len(universe)
    if k > n:
        raise KTooLargeError(f"k={k} exceeds universe of {n}")
    # Canonical sorted-access order: score descending, id ascending.
    access = [
        sorted(scores, key=lambda inst: (-scores[inst], inst)) for scores in by_list
    ]
    count = len(rank_lists)

    seen_in: dict[str, int] = {}
    means: dict[str, float] = {}
    top_means: list[float] = []  # min-heap of the k best means seen so far
    fully_seen = 0
    for depth in range(n):
        for scores, order in zip(by_list, access):
            institution = order[depth]
            hits = seen_in.get(institution, 0) + 1
            seen_in[institution] = hits
            if hits == 1:
                mean = _mean_score([other[institution] for other in by_list])
                means[institution] = mean
                if len(top_means) < k:
                    heapq.heappush(top_means, mean)
                elif mean > top_means[0]:
                    heapq.heappushpop(top_means, mean)
            if hits == count:
                fully_seen += 1
        if fully_seen >= k:
            threshold = _mean_score([scores[order[depth]] for scores, order in zip(by_list, access)])
            if threshold < top_means[0]:
                break
    ordered = sorted(means, key=lambda inst: (-means[inst], inst))[:k]
    items = tuple(
        RankedItem(position, institution, means[institution])
        for position, institution in enumerate(ordered, start=1)
    )
    return RankList("fagin", items)


def complete_rank_lists(
    rank_lists: Sequence[RankList], universe: Sequence[str]
) -> list[RankList]:
    """Pad partial lists to a shared universe with zero-score entries."""
    completed = []
    for rank_list in rank_lists:
        present = {item.institution_id for item in rank_list.items}
        missing = sorted(set(universe) - present)
        if not missing:
            completed.append(rank_list)
            continue
        items = list(rank_list.items)
        next_rank = len(items) + 1
        for institution in missing:
            items.append(RankedItem(next_rank, institution, Fraction(0)))
            next_rank += 1
        completed.append(RankList(rank_list.label, tuple(items)))
    return completed


def run_aggregation(spec: AggregationSpec, year_tables: Sequence[ScoreTable]) -> RankList:
    """Aggregate per-year raw tables into one final ranking.

    Positional methods first turn each year into a ranking of its
    normalized table; the normalized-sum method works on the tables
    directly. The UNKNOWN sentinel never takes part.
    """
    if not year_tables:
        raise ValueError("no year tables to aggregate")
    visible = [drop_unknown(table) for table in year_tables]
    if spec.method == METHOD_NORMALIZED_SUM:
        final = normalized_sum(visible)
        ranking = to_ranking(final, label=spec.label)
    elif spec.method == METHOD_BORDA:
        yearly = [to_ranking(normalize(table)) for table in visible]
        final = borda_aggregate(yearly, spec.borda_variant, spec.p)
        ranking = to_ranking(final, label=spec.label)
    else:
        yearly = [to_ranking(normalize(table)) for table in visible]
        universe = sorted({inst for table in visible for inst in table.entries})
        padded = complete_rank_lists(yearly, universe)
        top = fagin_topk(padded, spec.fagin_k or DEFAULT_TOP_K)
        ranking = RankList(spec.label, top.items)
    return ranking


def ranking_file_name(venue_id: str, label: str) -> str:
    return f"ranking_{venue_id}_{label}.csv"


def write_ranking_csv(rank_list: RankList, path: str) -> None:
    """Write ``rank,institution_id,score`` in rank order."""
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        out.write("rank,institution_id,score\n")
        for item in rank_list.items:
            out.write(f"{item.rank},{item.institution_id},{float(item.score)!r}\n")


def read_ranking_csv(path: str, label: str) -> RankList:
    items = []
    with open(path, "r", encoding="utf-8") as src:
        header = src.readline()
        if header.strip() != "rank,institution_id,score":
            raise ValueError(f"{path}: not a ranking file")
        for line in src:
            line = line.rstrip("\n")
            if not line:
                continue
            # Institution ids may contain commas; rank and score cannot.
            rank_text, _, rest = line.partition(",")
            institution, _, score_text = rest.rpartition(",")
            items.append(RankedItem(int(rank_text), institution, float(score_text)))
    return RankList(label, tuple(items))


def write_ranking_json(rank_list: RankList, spec: AggregationSpec, path: str) -> None:
    """Write the ranking with the aggregation settings echoed alongside."""
    payload = {
        "method": {
            "name": spec.method,
            "borda_variant": spec.borda_variant if spec.method == METHOD_BORDA else None,
            "p": spec.p,
            "fagin_k": spec.fagin_k if spec.method == METHOD_FAGIN else None,
            "label": spec.label,
        },
        "items": [
            {
                "rank": item.rank,
                "institution_id": item.institution_id,
                "score": float(item.score),
            }
            for item in rank_list.items
        ],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        json.dump(payload, out, indent=2)
        out.write("\n")
