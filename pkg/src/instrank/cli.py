"""Command-line front-end: synth, score, aggregate, evaluate, pipeline.

Exit codes are part of the contract: 0 success, 2 configuration error,
3 I/O error, 4 parse failure under --strict, 5 all-zero ground truth.
All outputs are UTF-8 with LF line endings and rerunning any command on
unchanged inputs reproduces its outputs byte for byte.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .aggregate import (
    AggregationSpec,
    InvalidPError,
    KTooLargeError,
    ranking_file_name,
    read_ranking_csv,
    run_aggregation,
    write_ranking_csv,
    write_ranking_json,
)
from .evaluate import (
    EvalReport,
    EvalRow,
    GroundTruth,
    ZeroIdealError,
    ndcg_at_k,
    render_report_csv,
    render_report_text,
)
from .ingest import (
    MalformedRowError,
    ParseStats,
    TableSchema,
    YearRange,
    filter_papers,
    iter_affiliations,
    iter_papers,
    join_affiliations,
)
from .scoring import (
    RAW,
    ScoreTable,
    paper_shares,
    read_score_csv,
    score_file_name,
    write_score_csv,
)
from .synth import CorpusParams, InvalidParamsError, generate_corpus

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_PARSE = 4
EXIT_ZERO_TRUTH = 5

DEFAULT_METHODS = "normalized_sum, borda:sum, fagin"

DELIMITER_NAMES = {"tab": "\t", "\\t": "\t", "comma": ",", "space": " ", "pipe": "|"}


class ConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    papers_path: str
    affiliations_path: str
    papers_schema: TableSchema
    affiliations_schema: TableSchema
    venues: list[str]
    train_years: YearRange
    truth_year: int
    specs: list[AggregationSpec] = field(default_factory=list)
    k: int = 20
    output_dir: str = "out"
    strict: bool = False
    jobs: int = 1

    def validate(self) -> None:
        if self.truth_year <= self.train_years.high:
            raise ConfigError(
                f"training years {self.train_years.low}-{self.train_years.high} "
                f"must precede the truth year {self.truth_year}"
            )
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        if not self.specs:
            raise ConfigError("no aggregation methods configured")

    def scored_years(self) -> YearRange:
        # Scores are needed for the training span and the held-out year.
        return YearRange(self.train_years.low, self.truth_year)


def _parse_delimiter(text: str) -> str:
    return DELIMITER_NAMES.get(text.strip().lower(), text)


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _schema_from_section(
    section: configparser.SectionProxy | None, default: TableSchema, kind: str
) -> TableSchema:
    if section is None:
        return default
    try:
        common = {
            "delimiter": _parse_delimiter(section.get("delimiter", "tab")),
            "has_header": _parse_bool(section.get("has_header", "false")),
        }
        if kind == "papers":
            return TableSchema(
                paper_id=section.getint("paper_id", default.paper_id),
                year=section.getint("year", default.year),
                venue_id=section.getint("venue_id", default.venue_id),
                **common,
            )
        return TableSchema(
            paper_id=section.getint("paper_id", default.paper_id),
            author_id=section.getint("author_id", default.author_id),
            institution_id=section.getint("institution_id", default.institution_id),
            **common,
        )
    except ValueError as exc:
        raise ConfigError(f"bad {kind} table schema: {exc}") from exc


def load_config(path: str, overrides: Sequence[str] = ()) -> PipelineConfig:
    """Read an INI config file, applying ``section.key=value`` overrides."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    loaded = parser.read(path, encoding="utf-8")
    if not loaded:
        raise ConfigError(f"cannot read config file {path!r}")
    for override in overrides:
        try:
            target, value = override.split("=", 1)
            section, key = target.split(".", 1)
        except ValueError:
            raise ConfigError(f"override must look like section.key=value: {override!r}")
        if section not in parser:
            parser.add_section(section)
        parser[section][key] = value
    try:
        inputs = parser["inputs"]
        selection = parser["selection"]
        papers_path = inputs["papers"]
        affiliations_path = inputs["affiliations"]
        venues = [v.strip() for v in selection["venues"].split(",") if v.strip()]
        train_years = YearRange.parse(selection["train_years"])
        truth_year = int(selection["truth_year"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"config {path}: {exc!r}") from exc
    papers_schema = _schema_from_section(
        parser["papers_table"] if "papers_table" in parser else None,
        TableSchema.papers_default(),
        "papers",
    )
    affiliations_schema = _schema_from_section(
        parser["affiliations_table"] if "affiliations_table" in parser else None,
        TableSchema.affiliations_default(),
        "affiliations",
    )
    methods_text = parser.get("aggregation", "methods", fallback=DEFAULT_METHODS)
    try:
        specs = [
            AggregationSpec.parse(text)
            for text in (part.strip() for part in methods_text.split(","))
            if text
        ]
        k = parser.getint("aggregation", "k", fallback=20)
        strict = parser.getboolean("run", "strict", fallback=False)
        jobs = parser.getint("run", "jobs", fallback=1)
    except ValueError as exc:
        raise ConfigError(f"config {path}: {exc}") from exc
    config = PipelineConfig(
        papers_path=papers_path,
        affiliations_path=affiliations_path,
        papers_schema=papers_schema,
        affiliations_schema=affiliations_schema,
        venues=venues,
        train_years=train_years,
        truth_year=truth_year,
        specs=specs,
        k=k,
        output_dir=parser.get("output", "dir", fallback="out"),
        strict=strict,
        jobs=jobs,
    )
    return config


def cmd_score(config: PipelineConfig) -> int:
    """One streaming pass over both dumps, emitting per-venue-year tables."""
    if not config.venues:
        log.warning("venue set is empty; nothing to score")
        return EXIT_OK
    os.makedirs(config.output_dir, exist_ok=True)
    span = config.scored_years()
    venue_set = set(config.venues)
    paper_stats = ParseStats()
    affil_stats = ParseStats()
    papers = filter_papers(
        iter_papers(config.papers_path, config.papers_schema, config.strict, paper_stats),
        venue_set,
        span,
    )
    rows = iter_affiliations(
        config.affiliations_path, config.affiliations_schema, config.strict, affil_stats
    )
    unattributed = 0

    def count_missing(_paper) -> None:
        nonlocal unattributed
        unattributed += 1

    totals: dict[tuple[str, int], dict[str, Fraction]] = {}
    for attributed in join_affiliations(papers, rows, on_missing=count_missing):
        bucket = totals.setdefault(
            (attributed.paper.venue_id, attributed.paper.year), {}
        )
        for institution, amount in paper_shares(attributed).shares:
            bucket[institution] = bucket.get(institution, Fraction(0)) + amount
    for venue_id in config.venues:
        for year in span:
            entries = totals.get((venue_id, year), {})
            table = ScoreTable(year, dict(sorted(entries.items())), RAW)
            write_score_csv(
                table, os.path.join(config.output_dir, score_file_name(venue_id, year))
            )
    print(
        f"papers: {paper_stats.rows} rows, {paper_stats.skipped} skipped; "
        f"affiliations: {affil_stats.rows} rows, {affil_stats.skipped} skipped; "
        f"filtered papers without affiliations: {unattributed}",
        file=sys.stderr,
    )
    return EXIT_OK


def _training_tables(config: PipelineConfig, venue_id: str) -> list[ScoreTable]:
    return [
        read_score_csv(
            os.path.join(config.output_dir, score_file_name(venue_id, year)), year
        )
        for year in config.train_years
    ]


def cmd_aggregate(config: PipelineConfig, method: str | None = None) -> int:
    """Aggregate the training-year score files into final rankings."""
    if method is None:
        specs = config.specs
    else:
        try:
            specs = [AggregationSpec.parse(method)]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def one_venue(venue_id: str) -> None:
        tables = _training_tables(config, venue_id)
        for spec in specs:
            ranking = run_aggregation(spec, tables)
            base = os.path.join(config.output_dir, ranking_file_name(venue_id, spec.label))
            write_ranking_csv(ranking, base)
            write_ranking_json(ranking, spec, base[: -len(".csv")] + ".json")

    if config.jobs > 1 and len(config.venues) > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            futures = [pool.submit(one_venue, venue_id) for venue_id in config.venues]
        for future in futures:
            future.result()
    else:
        for venue_id in config.venues:
            one_venue(venue_id)
    return EXIT_OK


def _build_report(config: PipelineConfig) -> EvalReport:
    rows = []
    for venue_id in config.venues:
        truth_table = read_score_csv(
            os.path.join(
                config.output_dir, score_file_name(venue_id, config.truth_year)
            ),
            config.truth_year,
        )
        truth = GroundTruth.from_score_table(truth_table)
        values: dict[str, float] = {}
        for spec in config.specs:
            ranking = read_ranking_csv(
                os.path.join(
                    config.output_dir, ranking_file_name(venue_id, spec.label)
                ),
                spec.label,
            )
            values[spec.label] = ndcg_at_k(ranking, truth, config.k)
        winner = max(values, key=values.get)
        rows.append(EvalRow(venue_id, values, winner))
    return EvalReport(config.k, rows)


def cmd_evaluate(config: PipelineConfig) -> int:
    """Score every configured method against the held-out year."""
    report = _build_report(config)
    text = render_report_text(report)
    with open(
        os.path.join(config.output_dir, "report.txt"), "w", encoding="utf-8", newline="\n"
    ) as out:
        out.write(text)
    with open(
        os.path.join(config.output_dir, "report.csv"), "w", encoding="utf-8", newline="\n"
    ) as out:
        out.write(render_report_csv(report))
    sys.stdout.write(text)
    return EXIT_OK


def cmd_pipeline(config: PipelineConfig) -> int:
    """score, aggregate, evaluate, then predict the year after the truth year."""
    code = cmd_score(config)
    if code != EXIT_OK:
        return code
    if not config.venues:
        return EXIT_OK
    code = cmd_aggregate(config)
    if code != EXIT_OK:
        return code
    code = cmd_evaluate(config)
    if code != EXIT_OK:
        return code
    report = _build_report(config)
    by_label = {spec.label: spec for spec in config.specs}
    for row in report.rows:
        winning_spec = by_label[row.winner]
        tables = [
            read_score_csv(
                os.path.join(
                    config.output_dir, score_file_name(row.venue_id, year)
                ),
                year,
            )
            for year in config.scored_years()
        ]
        prediction = run_aggregation(winning_spec, tables)
        write_ranking_csv(
            prediction,
            os.path.join(config.output_dir, f"prediction_{row.venue_id}.csv"),
        )
    return EXIT_OK


def _parse_count_range(text: str) -> tuple[int, int]:
    if "-" in text:
        low, high = text.split("-", 1)
        return int(low), int(high)
    value = int(text)
    return value, value


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        params = CorpusParams(
            num_institutions=args.institutions,
            num_authors=args.authors,
            num_venues=args.venues,
            years=YearRange.parse(args.years),
            papers_per_venue_year=args.papers_per_venue_year,
            authors_per_paper=_parse_count_range(args.authors_per_paper),
            affils_per_author=_parse_count_range(args.affils_per_author),
            strength_drift=args.drift,
            unknown_rate=args.unknown_rate,
            filler_width=args.filler_width,
            rng_seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    os.makedirs(args.out, exist_ok=True)
    generated = generate_corpus(params, args.out, compute_realized=not args.no_truth)
    emitted = [generated.papers_path, generated.affiliations_path]
    if generated.truth.realized is not None:
        for year, table in generated.truth.realized.items():
            path = os.path.join(args.out, f"truth_{year}.csv")
            write_score_csv(table, path)
            emitted.append(path)
    for path in emitted:
        print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="instrank",
        description="Rank institutions by publication credit and aggregate across years.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a synthetic corpus")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--institutions", type=int, default=50)
    synth.add_argument("--authors", type=int, default=2000)
    synth.add_argument("--venues", type=int, default=3)
    synth.add_argument("--years", default="2011-2015", help="e.g. 2011-2015")
    synth.add_argument("--papers-per-venue-year", type=int, default=100)
    synth.add_argument("--authors-per-paper", default="1-4", help="range, e.g. 1-4")
    synth.add_argument("--affils-per-author", default="1-2", help="range, e.g. 1-2")
    synth.add_argument("--drift", type=float, default=0.0)
    synth.add_argument("--unknown-rate", type=float, default=0.0)
    synth.add_argument("--filler-width", type=int, default=0)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument(
        "--no-truth",
        action="store_true",
        help="stream to disk without computing realized truth (for huge corpora)",
    )

    for name, help_text in (
        ("score", "stream the dumps into per-venue-year score tables"),
        ("aggregate", "aggregate score tables into final rankings"),
        ("evaluate", "compare rankings against the truth year"),
        ("pipeline", "run score, aggregate, evaluate, and predict"),
    ):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", required=True, help="INI config file")
        sub.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override any config key",
        )
        sub.add_argument("--k", type=int, default=None, help="evaluation cutoff")
        sub.add_argument("--jobs", type=int, default=None, help="parallel venues")
        sub.add_argument("--strict", action="store_true", help="abort on malformed rows")
        sub.add_argument("--output-dir", default=None)
        if name == "aggregate":
            sub.add_argument("--method", default=None, help="run a single method")

    return parser


def _configured(args: argparse.Namespace) -> PipelineConfig:
    config = load_config(args.config, args.set)
    if args.k is not None:
        config.k = args.k
    if args.jobs is not None:
        config.jobs = args.jobs
    if args.strict:
        config.strict = True
    if args.output_dir is not None:
        config.output_dir = args.output_dir
    config.validate()
    return config


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(args)
        config = _configured(args)
        if args.command == "score":
            return cmd_score(config)
        if args.command == "aggregate":
            return cmd_aggregate(config, args.method)
        if args.command == "evaluate":
            return cmd_evaluate(config)
        return cmd_pipeline(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    except (InvalidPError, InvalidParamsError, KTooLargeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MalformedRowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ZeroIdealError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ZERO_TRUTH
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
