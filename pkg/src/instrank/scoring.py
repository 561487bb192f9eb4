"""Per-year institution credit tables.

Each paper carries one unit of credit, split equally over its distinct
authors, then over each author's distinct institutions on that paper.
Shares are exact rationals, so accumulation is associative and any
partitioning of the paper stream merges to a bit-identical table; final
tables are keyed in sorted institution order for reproducible iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

from .ingest import UNKNOWN_INSTITUTION, AttributedPaper

log = logging.getLogger(__name__)

RAW = "raw"
NORMALIZED = "normalized"


class YearMismatchError(ValueError):
    """Partial tables for different years cannot be merged."""


class InstitutionShare(NamedTuple):
    institution_id: str
    amount: Fraction


@dataclass(frozen=True)
class ShareList:
    """One paper's credit split, sorted by institution id, summing to 1."""

    paper_id: str
    shares: tuple[InstitutionShare, ...]


@dataclass(frozen=True)
class ScoreTable:
    """Institution credit for one year.

    ``provenance`` records whether entries are raw sums or have been
    scaled to a maximum of 1. Raw tables may carry the UNKNOWN sentinel;
    ranking-grade outputs must not.
    """

    year: int
    entries: dict[str, Fraction]
    provenance: str = RAW


def paper_shares(paper: AttributedPaper) -> ShareList:
    """Split one paper's unit of credit per the attribution rule.

    Duplicate (author, institution) rows are deduplicated first. Authors
    whose rows carry the UNKNOWN sentinel credit it like any other
    institution, so the split always sums to exactly 1.
    """
    by_author: dict[str, dict[str, None]] = {}
    for row in paper.affiliations:
        by_author.setdefault(row.author_id, {})[row.institution_id] = None
    credit: dict[str, Fraction] = {}
    author_count = len(by_author)
    for institutions in by_author.values():
        part = Fraction(1, author_count * len(institutions))
        for institution in institutions:
            credit[institution] = credit.get(institution, Fraction(0)) + part
    shares = tuple(
        InstitutionShare(institution, amount)
        for institution, amount in sorted(credit.items())
    )
    return ShareList(paper.paper.paper_id, shares)


def accumulate_scores(share_lists: Iterable[ShareList], year: int) -> ScoreTable:
    """Sum share lists into one raw table for the given year."""
    totals: dict[str, Fraction] = {}
    for share_list in share_lists:
        for institution, amount in share_list.shares:
            totals[institution] = totals.get(institution, Fraction(0)) + amount
    return ScoreTable(year, dict(sorted(totals.items())), RAW)


def merge_partials(tables: Sequence[ScoreTable]) -> ScoreTable:
    """Pointwise-sum partial tables from any partitioning of the stream."""
    if not tables:
        raise ValueError("nothing to merge")
    year = tables[0].year
    totals: dict[str, Fraction] = {}
    for table in tables:
        if table.year != year:
            raise YearMismatchError(f"cannot merge year {table.year} into {year}")
        for institution, amount in table.entries.items():
            totals[institution] = totals.get(institution, Fraction(0)) + amount
    return ScoreTable(year, dict(sorted(totals.items())), RAW)


def normalize(table: ScoreTable) -> ScoreTable:
    """Scale entries so the maximum is exactly 1.

    An empty table normalizes to an empty table. An all-zero table has no
    meaningful scale; it is passed through unchanged with a warning.
    """
    if not table.entries:
        return ScoreTable(table.year, {}, NORMALIZED)
    top = max(table.entries.values())
    if top == 0:
        log.warning("year %d: all scores are zero, normalization is a no-op", table.year)
        return ScoreTable(table.year, dict(table.entries), NORMALIZED)
    scaled = {institution: amount / top for institution, amount in table.entries.items()}
    return ScoreTable(table.year, dict(sorted(scaled.items())), NORMALIZED)


def drop_unknown(table: ScoreTable) -> ScoreTable:
    """Remove the UNKNOWN sentinel before any ranking-grade use."""
    if UNKNOWN_INSTITUTION not in table.entries:
        return table
    kept = {
        institution: amount
        for institution, amount in table.entries.items()
        if institution != UNKNOWN_INSTITUTION
    }
    return ScoreTable(table.year, kept, table.provenance)


def score_file_name(venue_id: str, year: int) -> str:
    return f"scores_{venue_id}_{year}.csv"


def write_score_csv(table: ScoreTable, path: str) -> None:
    """Write ``institution_id,score`` sorted by score descending, id ascending.

    The UNKNOWN sentinel never reaches disk. Scores are written as
    shortest round-tripping floats, so a rerun is byte-identical.
    """
    visible = drop_unknown(table)
    ordered = sorted(visible.entries.items(), key=lambda item: (-item[1], item[0]))
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        out.write("institution_id,score\n")
        for institution, amount in ordered:
            out.write(f"{institution},{float(amount)!r}\n")


def read_score_csv(path: str, year: int) -> ScoreTable:
    """Read a table written by write_score_csv back into exact form."""
    entries: dict[str, Fraction] = {}
    with open(path, "r", encoding="utf-8") as src:
        header = src.readline()
        if header.strip() != "institution_id,score":
            raise ValueError(f"{path}: not a score table")
        for line in src:
            line = line.rstrip("\n")
            if not line:
                continue
            institution, _, score = line.rpartition(",")
            entries[institution] = Fraction(float(score))
    return ScoreTable(year, dict(sorted(entries.items())), RAW)
