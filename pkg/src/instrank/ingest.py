"""Streaming readers for large delimited publication dumps.

Input files are plain or gzipped UTF-8 text, one record per line, fields
separated by a single-character delimiter (tab by default). There is no
quoting: a delimiter byte always splits fields. Files are never loaded
whole; every reader yields records one line at a time so memory stays
flat no matter how large the dump is.
"""

from __future__ import annotations

import gzip
import io
from dataclasses import dataclass, field
from typing import Callable, Collection, Iterable, Iterator, NamedTuple

# Sentinel institution id assigned when the affiliation field is empty.
# Kept in raw score tables so credit is conserved, but excluded from any
# ranking-grade output.
UNKNOWN_INSTITUTION = "UNKNOWN"

MIN_YEAR = 1900
MAX_YEAR = 2100

GZIP_MAGIC = b"\x1f\x8b"


class MalformedRowError(ValueError):
    """A data row that cannot be parsed under the configured schema."""

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"row {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class StreamError(OSError):
    """An I/O or decoding failure partway through a file."""

    def __init__(self, path: str, line_number: int, cause: Exception):
        super().__init__(f"{path}: read failed near row {line_number}: {cause}")
        self.path = path
        self.line_number = line_number


class DuplicatePaperIdError(ValueError):
    """The same paper id appeared twice in a filtered paper stream."""


@dataclass(frozen=True)
class TableSchema:
    """Column ordinals for one delimited table.

    Only the ordinals a given parser needs have to be set; rows may carry
    any number of extra columns beyond the configured ones. Ordinals are
    zero-based positions in the split row.
    """

    paper_id: int = 0
    year: int | None = None
    venue_id: int | None = None
    author_id: int | None = None
    institution_id: int | None = None
    delimiter: str = "\t"
    has_header: bool = False

    def __post_init__(self) -> None:
        ordinals = [
            o
            for o in (
                self.paper_id,
                self.year,
                self.venue_id,
                self.author_id,
                self.institution_id,
            )
            if o is not None
        ]
        if any(o < 0 for o in ordinals):
            raise ValueError("column ordinals must be non-negative")
        if len(set(ordinals)) != len(ordinals):
            raise ValueError("column ordinals must be distinct within a table")
        if len(self.delimiter) != 1:
            raise ValueError("delimiter must be a single character")

    @classmethod
    def papers_default(cls) -> "TableSchema":
        """Layout of the 2016 academic-graph paper dump."""
        return cls(paper_id=0, year=3, venue_id=8)

    @classmethod
    def affiliations_default(cls) -> "TableSchema":
        """Layout of the 2016 academic-graph paper-author-affiliation dump."""
        return cls(paper_id=0, author_id=1, institution_id=2)


class PaperRecord(NamedTuple):
    paper_id: str
    year: int
    venue_id: str


class AffiliationRow(NamedTuple):
    paper_id: str
    author_id: str
    institution_id: str


class AttributedPaper(NamedTuple):
    """A filtered paper together with every affiliation row that cites it."""

    paper: PaperRecord
    affiliations: tuple[AffiliationRow, ...]


class RawRow(NamedTuple):
    line_number: int
    fields: list[str]


@dataclass
class ParseStats:
    """Counts kept while parsing one table."""

    rows: int = 0
    parsed: int = 0
    skipped: int = 0


@dataclass(frozen=True)
class YearRange:
    """Inclusive span of publication years."""

    low: int
    high: int

    def __post_init__(self) -> None:
        if self.low > self.high:
            raise ValueError(f"empty year range {self.low}-{self.high}")

    def __contains__(self, year: int) -> bool:
        return self.low <= year <= self.high

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.low, self.high + 1))

    @classmethod
    def parse(cls, text: str) -> "YearRange":
        """Parse ``"2011-2014"`` or a single year ``"2011"``."""
        part = text.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            return cls(int(lo), int(hi))
        year = int(part)
        return cls(year, year)


def open_table(path: str, schema: TableSchema) -> Iterator[RawRow]:
    """Stream raw rows from a delimited file, one at a time.

    Gzip compression is detected from the file's magic bytes, not its
    name. A header row, when the schema declares one, is consumed and not
    yielded; line numbers still count it, so the first data row of a
    headered file is row 2. A missing file raises FileNotFoundError
    before iteration starts; failures mid-stream raise StreamError with
    the row number reached.
    """
    with open(path, "rb") as raw:
        if raw.read(2) == GZIP_MAGIC:
            raw.seek(0)
            stream: io.TextIOBase = io.TextIOWrapper(
                gzip.GzipFile(fileobj=raw), encoding="utf-8"
            )
        else:
            raw.seek(0)
            stream = io.TextIOWrapper(raw, encoding="utf-8")
        delimiter = schema.delimiter
        line_number = 0
        try:
            if schema.has_header:
                line_number = 1
                stream.readline()
            for line in stream:
                line_number += 1
                yield RawRow(line_number, line.rstrip("\r\n").split(delimiter))
        except (OSError, UnicodeDecodeError, EOFError) as exc:
            raise StreamError(path, line_number + 1, exc) from exc


def parse_paper_row(row: RawRow, schema: TableSchema) -> PaperRecord:
    """Extract a PaperRecord; raises MalformedRowError with the row number."""
    if schema.year is None or schema.venue_id is None:
        raise ValueError("schema does not describe a papers table")
    fields = row.fields
    needed = max(schema.paper_id, schema.year, schema.venue_id)
    if len(fields) <= needed:
        raise MalformedRowError(
            row.line_number, f"expected at least {needed + 1} columns, got {len(fields)}"
        )
    paper_id = fields[schema.paper_id]
    if not paper_id:
        raise MalformedRowError(row.line_number, "empty paper id")
    try:
        year = int(fields[schema.year])
    except ValueError:
        raise MalformedRowError(
            row.line_number, f"year {fields[schema.year]!r} is not an integer"
        ) from None
    if not MIN_YEAR <= year <= MAX_YEAR:
        raise MalformedRowError(
            row.line_number, f"year {year} outside {MIN_YEAR}-{MAX_YEAR}"
        )
    return PaperRecord(paper_id, year, fields[schema.venue_id])


def parse_affiliation_row(row: RawRow, schema: TableSchema) -> AffiliationRow:
    """Extract an AffiliationRow; empty institution becomes the UNKNOWN sentinel."""
    if schema.author_id is None or schema.institution_id is None:
        raise ValueError("schema does not describe an affiliations table")
    fields = row.fields
    needed = max(schema.paper_id, schema.author_id, schema.institution_id)
    if len(fields) <= needed:
        raise MalformedRowError(
            row.line_number, f"expected at least {needed + 1} columns, got {len(fields)}"
        )
    paper_id = fields[schema.paper_id]
    if not paper_id:
        raise MalformedRowError(row.line_number, "empty paper id")
    author_id = fields[schema.author_id]
    if not author_id:
        raise MalformedRowError(row.line_number, "empty author id")
    institution = fields[schema.institution_id] or UNKNOWN_INSTITUTION
    return AffiliationRow(paper_id, author_id, institution)


def iter_papers(
    path: str,
    schema: TableSchema,
    strict: bool = False,
    stats: ParseStats | None = None,
) -> Iterator[PaperRecord]:
    """Parse a papers table, skipping (or, when strict, aborting on) bad rows."""
    for row in open_table(path, schema):
        if stats is not None:
            stats.rows += 1
        try:
            record = parse_paper_row(row, schema)
        except MalformedRowError:
            if strict:
                raise
            if stats is not None:
                stats.skipped += 1
            continue
        if stats is not None:
            stats.parsed += 1
        yield record


def iter_affiliations(
    path: str,
    schema: TableSchema,
    strict: bool = False,
    stats: ParseStats | None = None,
) -> Iterator[AffiliationRow]:
    """Parse an affiliations table with the same skip-or-abort policy."""
    for row in open_table(path, schema):
        if stats is not None:
            stats.rows += 1
        try:
            record = parse_affiliation_row(row, schema)
        except MalformedRowError:
            if strict:
                raise
            if stats is not None:
                stats.skipped += 1
            continue
        if stats is not None:
            stats.parsed += 1
        yield record


def filter_papers(
    papers: Iterable[PaperRecord],
    venues: Collection[str],
    years: YearRange,
) -> Iterator[PaperRecord]:
    """Keep papers whose venue is in the set and year in the inclusive range.

    Order is preserved; an empty venue set selects nothing.
    """
    for paper in papers:
        if paper.venue_id in venues and paper.year in years:
            yield paper


def join_affiliations(
    papers: Iterable[PaperRecord],
    rows: Iterable[AffiliationRow],
    on_missing: Callable[[PaperRecord], None] | None = None,
) -> Iterator[AttributedPaper]:
    """Attach affiliation rows to each filtered paper.

    The filtered papers are indexed in memory; the affiliation stream is
    consumed once and never stored beyond the rows that match, so memory
    is proportional to the filtered set, not the dump. Papers that end up
    with no affiliation rows are reported through ``on_missing`` instead
    of the main stream. Emission order follows the paper stream.
    """
    index: dict[str, PaperRecord] = {}
    buckets: dict[str, list[AffiliationRow]] = {}
    for paper in papers:
        if paper.paper_id in index:
            raise DuplicatePaperIdError(
                f"paper id {paper.paper_id!r} appears twice in the filtered set"
            )
        index[paper.paper_id] = paper
        buckets[paper.paper_id] = []
    for row in rows:
        bucket = buckets.get(row.paper_id)
        if bucket is not None:
            bucket.append(row)
    for paper_id, paper in index.items():
        matched = buckets[paper_id]
        if matched:
            yield AttributedPaper(paper, tuple(matched))
        elif on_missing is not None:
            on_missing(paper)
