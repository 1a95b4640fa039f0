"""readrank: pairwise learning-to-rank toolkit for readability assessment."""

from .corpus import (
    Corpus,
    Document,
    EmbeddingTable,
    Slug,
    build_corpus,
    embed_document,
    featurize,
    load_corpus,
    load_embeddings,
    save_corpus,
    save_embeddings,
    tokenize,
)
from .errors import (
    MetricUndefinedError,
    ReadrankError,
    TrainingDivergedError,
    ValidationError,
)
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    FoldPlan,
    make_folds,
    run_cross_corpus,
    run_cross_lingual,
    run_cv,
)
from .metrics import (
    MetricReport,
    SlugEvaluation,
    classification_metrics,
    evaluate_corpus,
    kendall,
    ndcg,
    ranking_accuracy,
    regression_metrics,
    spearman,
)
from .models import (
    LinearParams,
    MlpParams,
    ModelBundle,
    PairScore,
    TrainConfig,
    load_model,
    nprm_forward,
    nprm_gradient,
    pair_features,
    pairwise_logistic_loss,
    save_model,
    train_classifier,
    train_nprm,
    train_ols,
    train_ranksvm,
    train_regressor_mlp,
)
from .pairs import PairExample, PairSet, build_pairset, subsample_slug
from .ranker import RankingInput, ScoredRanking, rank_by_scores, rank_nprm, rank_ranksvm
from .stats import PairedSample, TestResult, compare_models, wilcoxon_signed_rank
from .synth import generate_corpus

__version__ = "0.1.0"

__all__ = [
    "Corpus", "Document", "EmbeddingTable", "Slug", "build_corpus", "embed_document",
    "featurize", "load_corpus", "load_embeddings", "save_corpus", "save_embeddings",
    "tokenize",
    "MetricUndefinedError", "ReadrankError", "TrainingDivergedError", "ValidationError",
    "ExperimentConfig", "ExperimentReport", "FoldPlan", "make_folds",
    "run_cross_corpus", "run_cross_lingual", "run_cv",
    "MetricReport", "SlugEvaluation", "classification_metrics", "evaluate_corpus",
    "kendall", "ndcg", "ranking_accuracy", "regression_metrics", "spearman",
    "LinearParams", "MlpParams", "ModelBundle", "PairScore", "TrainConfig",
    "load_model", "nprm_forward", "nprm_gradient", "pair_features",
    "pairwise_logistic_loss", "save_model", "train_classifier", "train_nprm",
    "train_ols", "train_ranksvm", "train_regressor_mlp",
    "PairExample", "PairSet", "build_pairset", "subsample_slug",
    "RankingInput", "ScoredRanking", "rank_by_scores", "rank_nprm", "rank_ranksvm",
    "PairedSample", "TestResult", "compare_models", "wilcoxon_signed_rank",
    "generate_corpus",
    "__version__",
]
