"""Rank research institutions from publication records.

The pipeline streams delimited paper/affiliation dumps, splits each
paper's unit of credit over authors and their institutions, builds
per-year score tables, aggregates the years into a consensus ranking
(normalized score sum, Borda variants, or Fagin top-k), and evaluates
rankings as NDCG against a held-out year.
"""

from .aggregate import (
    AggregationSpec,
    FinalScoreTable,
    RankList,
    RankedItem,
    borda_aggregate,
    borda_scores,
    fagin_topk,
    normalized_sum,
    run_aggregation,
    to_ranking,
)
from .evaluate import (
    EvalReport,
    EvalRow,
    GroundTruth,
    dcg_at_k,
    evaluate_protocol,
    ndcg_at_k,
)
from .ingest import (
    UNKNOWN_INSTITUTION,
    AffiliationRow,
    AttributedPaper,
    PaperRecord,
    TableSchema,
    YearRange,
    filter_papers,
    join_affiliations,
    open_table,
)
from .scoring import (
    ScoreTable,
    ShareList,
    accumulate_scores,
    merge_partials,
    normalize,
    paper_shares,
)
from .synth import CorpusParams, PlantedTruth, generate_corpus, naive_score, naive_topk

__version__ = "0.1.0"

__all__ = [
    "AffiliationRow",
    "AggregationSpec",
    "AttributedPaper",
    "CorpusParams",
    "EvalReport",
    "EvalRow",
    "FinalScoreTable",
    "GroundTruth",
    "PaperRecord",
    "PlantedTruth",
    "RankList",
    "RankedItem",
    "ScoreTable",
    "ShareList",
    "TableSchema",
    "UNKNOWN_INSTITUTION",
    "YearRange",
    "accumulate_scores",
    "borda_aggregate",
    "borda_scores",
    "dcg_at_k",
    "evaluate_protocol",
    "fagin_topk",
    "filter_papers",
    "generate_corpus",
    "join_affiliations",
    "merge_partials",
    "naive_score",
    "naive_topk",
    "ndcg_at_k",
    "normalize",
    "normalized_sum",
    "open_table",
    "paper_shares",
    "run_aggregation",
    "to_ranking",
]
