"""Config loading, exit codes, and the command surface end to end."""

from __future__ import annotations

import json
import os
from fractions import Fraction

import pytest

from instrank.aggregate import ranking_file_name, read_ranking_csv, run_aggregation
from instrank.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_ZERO_TRUTH,
    ConfigError,
    load_config,
    main,
)
from instrank.ingest import UNKNOWN_INSTITUTION, YearRange
from instrank.scoring import read_score_csv, score_file_name
from instrank.synth import CorpusParams, generate_corpus, iter_corpus, naive_score


def write_config(
    path,
    papers,
    affiliations,
    out_dir,
    venues="V0",
    train="2011-2012",
    truth="2013",
    extra="",
):
    path.write_text(
        "[inputs]\n"
        f"papers = {papers}\n"
        f"affiliations = {affiliations}\n"
        "\n"
        "[selection]\n"
        f"venues = {venues}\n"
        f"train_years = {train}\n"
        f"truth_year = {truth}\n"
        "\n"
        "[output]\n"
        f"dir = {out_dir}\n"
        f"{extra}",
        encoding="utf-8",
    )
    return str(path)


def tiny_dumps(tmp_path):
    """Three years of a two-institution venue with a fixed 2:1 split."""
    papers = []
    affils = []
    serial = 0
    for year in (2011, 2012, 2013):
        for institution in ("IA", "IA", "IB"):
            serial += 1
            papers.append(f"P{serial}\t\t\t{year}\t\t\t\t\tV0")
            affils.append(f"P{serial}\tA{serial}\t{institution}")
    papers_path = tmp_path / "papers.txt"
    affils_path = tmp_path / "affils.txt"
    papers_path.write_text("".join(line + "\n" for line in papers), encoding="utf-8")
    affils_path.write_text("".join(line + "\n" for line in affils), encoding="utf-8")
    return str(papers_path), str(affils_path)


def tiny_config(tmp_path, **kwargs):
    papers, affils = tiny_dumps(tmp_path)
    out_dir = str(tmp_path / "out")
    extra = kwargs.pop(
        "extra",
        "\n[aggregation]\nmethods = normalized_sum, borda:sum, fagin:2\nk = 2\n",
    )
    return write_config(
        tmp_path / "run.ini", papers, affils, out_dir, extra=extra, **kwargs
    ), out_dir


# --- load_config --------------------------------------------------------


def test_load_config_defaults(tmp_path):
    cfg_path, out_dir = tiny_config(tmp_path, extra="")
    config = load_config(cfg_path)
    assert config.venues == ["V0"]
    assert config.train_years == YearRange(2011, 2012)
    assert config.truth_year == 2013
    assert config.k == 20 and config.jobs == 1 and config.strict is False
    assert [spec.label for spec in config.specs] == [
        "normalized_sum",
        "borda_sum",
        "fagin",
    ]
    assert config.output_dir == out_dir
    assert config.papers_schema.year == 3 and config.papers_schema.venue_id == 8


def test_load_config_reads_table_sections_and_run_section(tmp_path):
    extra = (
        "\n[papers_table]\n"
        "paper_id = 1\nyear = 0\nvenue_id = 2\ndelimiter = comma\nhas_header = yes\n"
        "\n[run]\nstrict = true\njobs = 4\n"
        "\n[aggregation]\nmethods = borda:median\nk = 5\n"
    )
    cfg_path, _ = tiny_config(tmp_path, extra=extra)
    config = load_config(cfg_path)
    assert config.papers_schema.delimiter == ","
    assert config.papers_schema.has_header is True
    assert (config.papers_schema.paper_id, config.papers_schema.year) == (1, 0)
    assert config.strict is True and config.jobs == 4
    assert config.k == 5
    assert [spec.label for spec in config.specs] == ["borda_median"]


def test_load_config_applies_overrides(tmp_path):
    cfg_path, _ = tiny_config(tmp_path)
    config = load_config(
        cfg_path,
        ["selection.venues=V7", "aggregation.k=3", "run.jobs=2"],
    )
    assert config.venues == ["V7"]
    assert config.k == 3 and config.jobs == 2


def test_load_config_rejects_bad_overrides_and_missing_keys(tmp_path):
    cfg_path, _ = tiny_config(tmp_path)
    with pytest.raises(ConfigError):
        load_config(cfg_path, ["notakeyvalue"])
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.ini"))
    bare = tmp_path / "bare.ini"
    bare.write_text("[inputs]\npapers = x\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(str(bare))


def test_validate_rejects_truth_year_inside_training(tmp_path):
    cfg_path, _ = tiny_config(tmp_path, truth="2012")
    config = load_config(cfg_path)
    with pytest.raises(ConfigError):
        config.validate()


# --- exit codes ---------------------------------------------------------


def test_exit_2_on_config_error(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[inputs]\n", encoding="utf-8")
    assert main(["score", "--config", str(bad)]) == EXIT_CONFIG


def test_exit_2_on_truth_year_in_training_range(tmp_path):
    cfg_path, _ = tiny_config(tmp_path, truth="2011")
    assert main(["score", "--config", cfg_path]) == EXIT_CONFIG


def test_exit_2_on_unparseable_method(tmp_path):
    cfg_path, out_dir = tiny_config(tmp_path)
    assert main(["score", "--config", cfg_path]) == EXIT_OK
    code = main(["aggregate", "--config", cfg_path, "--method", "kemeny"])
    assert code == EXIT_CONFIG


def test_exit_2_when_fagin_k_exceeds_the_universe(tmp_path):
    # Default fagin cutoff is 20; the tiny corpus only has two institutions.
    cfg_path, _ = tiny_config(
        tmp_path, extra="\n[aggregation]\nmethods = fagin\n"
    )
    assert main(["score", "--config", cfg_path]) == EXIT_OK
    assert main(["aggregate", "--config", cfg_path]) == EXIT_CONFIG


def test_exit_3_on_missing_input_file(tmp_path):
    cfg_path, _ = tiny_config(tmp_path)
    code = main(
        ["score", "--config", cfg_path, "--set", "inputs.papers=/nonexistent/p.txt"]
    )
    assert code == EXIT_IO


def test_exit_4_on_malformed_row_under_strict(tmp_path):
    cfg_path, _ = tiny_config(tmp_path)
    papers, _ = tiny_dumps(tmp_path)
    with open(papers, "a", encoding="utf-8") as out:
        out.write("short\trow\n")
    assert main(["score", "--config", cfg_path, "--strict"]) == EXIT_PARSE
    # Lenient mode skips the row instead.
    assert main(["score", "--config", cfg_path]) == EXIT_OK


def test_exit_5_on_all_zero_truth_year(tmp_path):
    # Truth year 2014 has no papers, so its score table is empty.
    cfg_path, _ = tiny_config(
        tmp_path,
        train="2011-2012",
        truth="2014",
        extra="\n[aggregation]\nmethods = normalized_sum\nk = 2\n",
    )
    assert main(["pipeline", "--config", cfg_path]) == EXIT_ZERO_TRUTH


# --- score --------------------------------------------------------------


def test_score_writes_a_file_for_every_venue_year(tmp_path, capsys):
    cfg_path, out_dir = tiny_config(tmp_path)
    assert main(["score", "--config", cfg_path]) == EXIT_OK
    for year in (2011, 2012, 2013):
        path = os.path.join(out_dir, score_file_name("V0", year))
        table = read_score_csv(path, year)
        assert table.entries == {"IA": Fraction(2), "IB": Fraction(1)}
    err = capsys.readouterr().err
    assert "papers: 9 rows, 0 skipped" in err
    assert "filtered papers without affiliations: 0" in err


def test_score_empty_venue_set_writes_nothing(tmp_path):
    cfg_path, out_dir = tiny_config(tmp_path, venues="")
    assert main(["score", "--config", cfg_path]) == EXIT_OK
    assert not os.path.exists(out_dir)


def test_score_agrees_with_the_naive_oracle_per_venue(tmp_path):
    params = CorpusParams(
        num_institutions=10,
        num_authors=80,
        num_venues=2,
        years=YearRange(2011, 2013),
        papers_per_venue_year=40,
        unknown_rate=0.1,
        rng_seed=17,
    )
    corpus_dir = tmp_path / "corpus"
    corpus_dir.mkdir()
    corpus = generate_corpus(params, str(corpus_dir))
    out_dir = str(tmp_path / "out")
    cfg_path = write_config(
        tmp_path / "run.ini",
        corpus.papers_path,
        corpus.affiliations_path,
        out_dir,
        venues="V0, V1",
        train="2011-2012",
        truth="2013",
    )
    assert main(["score", "--config", cfg_path]) == EXIT_OK
    for venue_id in ("V0", "V1"):
        only_venue = [
            p for p in iter_corpus(params) if p.paper.venue_id == venue_id
        ]
        reference = naive_score(only_venue)
        for year in (2011, 2012, 2013):
            path = os.path.join(out_dir, score_file_name(venue_id, year))
            table = read_score_csv(path, year)
            expected = {
                inst: Fraction(float(value))
                for inst, value in reference[year].entries.items()
                if inst != UNKNOWN_INSTITUTION
            }
            assert table.entries == expected


# --- aggregate ----------------------------------------------------------


def test_aggregate_single_year_matches_the_score_order(tmp_path):
    cfg_path, out_dir = tiny_config(
        tmp_path,
        train="2011",
        truth="2012",
        extra="\n[aggregation]\nmethods = normalized_sum\nk = 2\n",
    )
    assert main(["score", "--config", cfg_path]) == EXIT_OK
    assert main(["aggregate", "--config", cfg_path]) == EXIT_OK
    ranking = read_ranking_csv(
        os.path.join(out_dir, ranking_file_name("V0", "normalized_sum")),
        "normalized_sum",
    )
    assert ranking.ids() == ["IA", "IB"]
    assert [item.score for item in ranking.items] == [1.0, 0.5]


def test_aggregate_method_flag_runs_only_that_method(tmp_path):
    cfg_path, out_dir = tiny_config(tmp_path)
    assert main(["score", "--config", cfg_path]) == EXIT_OK
    assert main(["aggregate", "--config", cfg_path, "--method", "fagin:2"]) == EXIT_OK
    produced = sorted(os.listdir(out_dir))
    rankings = [name for name in produced if name.startswith("ranking_")]
    assert rankings == ["ranking_V0_fagin.csv", "ranking_V0_fagin.json"]
    payload = json.loads(
        open(os.path.join(out_dir, "ranking_V0_fagin.json"), encoding="utf-8").read()
    )
    assert payload["method"]["name"] == "fagin"
    assert payload["method"]["fagin_k"] == 2


def test_aggregate_parallel_jobs_match_serial_output(tmp_path):
    params = CorpusParams(
        num_institutions=8,
        num_authors=60,
        num_venues=3,
        years=YearRange(2011, 2013),
        papers_per_venue_year=25,
        rng_seed=5,
    )
    corpus_dir = tmp_path / "corpus"
    corpus_dir.mkdir()
    corpus = generate_corpus(params, str(corpus_dir), compute_realized=False)
    outputs = {}
    for jobs, out_name in ((1, "serial"), (3, "parallel")):
        out_dir = str(tmp_path / out_name)
        cfg_path = write_config(
            tmp_path / f"run_{out_name}.ini",
            corpus.papers_path,
            corpus.affiliations_path,
            out_dir,
            venues="V0, V1, V2",
            train="2011-2012",
            truth="2013",
            extra="\n[aggregation]\nmethods = normalized_sum, borda:sum, fagin:5\n",
        )
        assert main(["score", "--config", cfg_path]) == EXIT_OK
        assert main(["aggregate", "--config", cfg_path, "--jobs", str(jobs)]) == EXIT_OK
        outputs[out_name] = {
            name: open(os.path.join(out_dir, name), "rb").read()
            for name in sorted(os.listdir(out_dir))
            if name.startswith("ranking_")
        }
    assert outputs["serial"] == outputs["parallel"]


# --- evaluate and pipeline ----------------------------------------------


def test_pipeline_perfect_agreement_scores_one_everywhere(tmp_path, capsys):
    cfg_path, out_dir = tiny_config(tmp_path)
    assert main(["pipeline", "--config", cfg_path]) == EXIT_OK
    report_csv = open(os.path.join(out_dir, "report.csv"), encoding="utf-8").read()
    assert report_csv == (
        "venue,method,ndcg@2\n"
        "V0,normalized_sum,1.0\n"
        "V0,borda_sum,1.0\n"
        "V0,fagin,1.0\n"
    )
    report_txt = open(os.path.join(out_dir, "report.txt"), encoding="utf-8").read()
    assert report_txt == (
        "NDCG@2 values for V0\n"
        "Conf. Name  normalized_sum  borda_sum  fagin\n"
        "V0          *1.000          1.000      1.000\n"
    )
    assert capsys.readouterr().out == report_txt
    prediction = open(
        os.path.join(out_dir, "prediction_V0.csv"), encoding="utf-8"
    ).read()
    assert prediction == "rank,institution_id,score\n1,IA,3.0\n2,IB,1.5\n"


def test_pipeline_reruns_byte_identically(tmp_path):
    params = CorpusParams(
        num_institutions=12,
        num_authors=100,
        num_venues=2,
        years=YearRange(2011, 2014),
        papers_per_venue_year=30,
        unknown_rate=0.05,
        rng_seed=29,
    )
    corpus_dir = tmp_path / "corpus"
    corpus_dir.mkdir()
    corpus = generate_corpus(params, str(corpus_dir), compute_realized=False)
    out_dir = str(tmp_path / "out")
    cfg_path = write_config(
        tmp_path / "run.ini",
        corpus.papers_path,
        corpus.affiliations_path,
        out_dir,
        venues="V0, V1",
        train="2011-2013",
        truth="2014",
        extra="\n[aggregation]\nmethods = normalized_sum, borda:sum, fagin:6\nk = 6\n",
    )

    def snapshot():
        return {
            name: open(os.path.join(out_dir, name), "rb").read()
            for name in sorted(os.listdir(out_dir))
        }

    assert main(["pipeline", "--config", cfg_path]) == EXIT_OK
    first = snapshot()
    assert main(["pipeline", "--config", cfg_path]) == EXIT_OK
    assert snapshot() == first
    assert any(name.startswith("prediction_") for name in first)


def test_pipeline_prediction_recomputes_from_the_winning_method(tmp_path):
    params = CorpusParams(
        num_institutions=9,
        num_authors=70,
        num_venues=1,
        years=YearRange(2011, 2013),
        papers_per_venue_year=50,
        rng_seed=13,
    )
    corpus_dir = tmp_path / "corpus"
    corpus_dir.mkdir()
    corpus = generate_corpus(params, str(corpus_dir), compute_realized=False)
    out_dir = str(tmp_path / "out")
    cfg_path = write_config(
        tmp_path / "run.ini",
        corpus.papers_path,
        corpus.affiliations_path,
        out_dir,
        venues="V0",
        train="2011-2012",
        truth="2013",
        extra="\n[aggregation]\nmethods = normalized_sum, borda:sum, fagin:4\nk = 4\n",
    )
    assert main(["pipeline", "--config", cfg_path]) == EXIT_OK
    config = load_config(cfg_path)
    report_lines = (
        open(os.path.join(out_dir, "report.csv"), encoding="utf-8")
        .read()
        .splitlines()[1:]
    )
    values = {}
    for line in report_lines:
        _, label, value = line.split(",")
        values[label] = float(value)
    winner_label = max(values, key=values.get)
    winning_spec = next(s for s in config.specs if s.label == winner_label)
    tables = [
        read_score_csv(os.path.join(out_dir, score_file_name("V0", year)), year)
        for year in (2011, 2012, 2013)
    ]
    expected = run_aggregation(winning_spec, tables)
    written = read_ranking_csv(os.path.join(out_dir, "prediction_V0.csv"), "p")
    assert written.ids() == expected.ids()


def test_evaluate_k_flag_overrides_config(tmp_path, capsys):
    cfg_path, out_dir = tiny_config(tmp_path)
    assert main(["pipeline", "--config", cfg_path]) == EXIT_OK
    capsys.readouterr()
    assert main(["evaluate", "--config", cfg_path, "--k", "1"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("NDCG@1 values for V0\n")


# --- synth command ------------------------------------------------------


def test_synth_command_emits_dumps_and_truth_tables(tmp_path, capsys):
    out_dir = str(tmp_path / "corpus")
    code = main(
        [
            "synth",
            "--out",
            out_dir,
            "--institutions",
            "5",
            "--authors",
            "30",
            "--venues",
            "1",
            "--years",
            "2011-2012",
            "--papers-per-venue-year",
            "10",
            "--seed",
            "2",
        ]
    )
    assert code == EXIT_OK
    printed = capsys.readouterr().out.splitlines()
    assert printed[0].endswith("papers.txt")
    assert printed[1].endswith("affiliations.txt")
    assert sorted(os.listdir(out_dir)) == [
        "affiliations.txt",
        "papers.txt",
        "truth_2011.csv",
        "truth_2012.csv",
    ]


def test_synth_command_rejects_bad_params(tmp_path):
    code = main(
        ["synth", "--out", str(tmp_path), "--institutions", "0"]
    )
    assert code == EXIT_CONFIG


def test_synth_no_truth_skips_the_oracle(tmp_path):
    out_dir = str(tmp_path / "corpus")
    code = main(
        [
            "synth",
            "--out",
            out_dir,
            "--institutions",
            "4",
            "--authors",
            "20",
            "--venues",
            "1",
            "--years",
            "2011",
            "--papers-per-venue-year",
            "5",
            "--no-truth",
        ]
    )
    assert code == EXIT_OK
    assert sorted(os.listdir(out_dir)) == ["affiliations.txt", "papers.txt"]
