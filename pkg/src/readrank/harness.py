"""Experiment orchestration: within-corpus CV, cross-corpus, cross-lingual.

Folds split by slug, never by document, so near-duplicate versions of a
text can never leak between train and test. Every random element derives
from the experiment seed (per-fold seeds are ``seed + fold_index``), and a
rerun with the same config produces a byte-identical report.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus import Corpus, featurize, load_corpus, load_embeddings
from .errors import ValidationError
from .metrics import MetricReport, classification_metrics, evaluate_corpus, regression_metrics
from .models import (
    MODEL_FAMILIES,
    LinearParams,
    MlpParams,
    TrainConfig,
    predict_classifier_levels,
    predict_linear,
    predict_regressor,
    train_classifier,
    train_nprm,
    train_ols,
    train_ranksvm,
    train_regressor_mlp,
)
from .pairs import build_pairset
from .ranker import RankingInput, ScoredRanking, rank_by_scores, rank_nprm, rank_ranksvm

log = logging.getLogger(__name__)

CROSS_LINGUAL_RA_FLOOR = 0.6


@dataclass
class FoldPlan:
    """A slug-level partition into k folds of near-equal size."""

    folds: list[list[str]]
    seed: int

    @property
    def k(self) -> int:
        return len(self.folds)


def make_folds(corpus: Corpus, k: int, seed: int) -> FoldPlan:
    """Shuffle rankable slugs with the seed and deal them round-robin."""
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    slugs = corpus.rankable_slugs()
    if len(slugs) < k:
        raise ValidationError(f"need at least {k} rankable slugs, got {len(slugs)}")
    rng = np.random.default_rng(seed)
    order = [slugs[i] for i in rng.permutation(len(slugs))]
    folds: list[list[str]] = [[] for _ in range(k)]
    for i, slug in enumerate(order):
        folds[i % k].append(slug)
    return FoldPlan(folds=[sorted(f) for f in folds], seed=seed)


@dataclass
class ExperimentConfig:
    """Everything that defines one experiment run."""

    family: str = "nprm"
    train: TrainConfig = field(default_factory=TrainConfig)
    corpus: str | None = None
    embeddings: str | None = None
    test_corpus: str | None = None
    test_embeddings: str | None = None
    k: int = 5
    m: int = 3
    seed: int = 0
    gain: str = "linear"
    log_base: float = 2.0

    def __post_init__(self) -> None:
        if self.family not in MODEL_FAMILIES:
            raise ValidationError(f"unknown model family '{self.family}' (choose from {MODEL_FAMILIES})")
        if self.k < 2:
            raise ValidationError(f"k must be >= 2, got {self.k}")
        if self.m < 2:
            raise ValidationError(f"m must be >= 2, got {self.m}")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "train": self.train.to_dict(),
            "corpus": self.corpus,
            "embeddings": self.embeddings,
            "test_corpus": self.test_corpus,
            "test_embeddings": self.test_embeddings,
            "k": int(self.k),
            "m": int(self.m),
            "seed": int(self.seed),
            "gain": self.gain,
            "log_base": float(self.log_base),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        train = data.pop("train", None)
        cfg_train = TrainConfig.from_dict(train) if isinstance(train, Mapping) else TrainConfig()
        return cls(train=cfg_train, **data)


@dataclass
class ExperimentReport:
    """Pooled metric report plus run provenance (config, folds, warnings)."""

    mode: str
    config: dict
    metrics: MetricReport
    folds: list[dict] | None = None
    languages: dict | None = None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        doc = {
            "mode": self.mode,
            "config": self.config,
            "report": self.metrics.to_dict(),
            "warnings": list(self.warnings),
        }
        if self.folds is not None:
            doc["folds"] = self.folds
        if self.languages is not None:
            doc["languages"] = self.languages
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def load_featurized(corpus_path: str | Path, embeddings_path: str | Path | None = None) -> Corpus:
    """Load a corpus and featurize it (with an embedding table when given)."""
    corpus = load_corpus(corpus_path)
    table = load_embeddings(embeddings_path) if embeddings_path else None
    return featurize(corpus, table)


def _train_family(family: str, corpus: Corpus, slug_ids: list[str], cfg: ExperimentConfig,
                  seed: int) -> tuple[object, int | None]:
    """Train one model on the given slugs; returns (params, n_training_pairs)."""
    tcfg = replace(cfg.train, seed=seed)
    if family in ("nprm", "ranksvm"):
        sub = corpus.subset(slug_ids)
        pairset = build_pairset(sub, m=cfg.m, seed=seed)
        train_docs = pairset.doc_ids()
        test_docs = {d for s in corpus.slugs if s not in set(slug_ids) for d in corpus.slugs[s].members}
        if train_docs & test_docs:
            raise RuntimeError("leakage: training pairs touch held-out documents")
        if family == "nprm":
            params, _ = train_nprm(pairset, corpus, tcfg)
        else:
            params, _ = train_ranksvm(pairset, corpus, tcfg)
        return params, len(pairset)
    docs = [d for s in slug_ids for d in corpus.slugs[s].members]
    if family == "ols":
        return train_ols(corpus, docs), None
    if family == "mlp-regressor":
        params, _ = train_regressor_mlp(corpus, docs, tcfg)
        return params, None
    if family == "classifier":
        params, _ = train_classifier(corpus, docs, tcfg)
        return params, None
    raise ValidationError(f"unknown model family '{family}'")


def _doc_scores(family: str, params: object, corpus: Corpus, doc_ids: list[str]) -> np.ndarray:
    x = corpus.vector_matrix(doc_ids)
    if family == "ols":
        return predict_linear(params, x)
    if family == "mlp-regressor":
        return predict_regressor(params, x)
    if family == "classifier":
        return predict_classifier_levels(params, x)
    raise ValidationError(f"family '{family}' has no per-document score")


def rankings_for(family: str, params: object, corpus: Corpus,
                 slug_ids: list[str]) -> dict[str, ScoredRanking]:
    """Per-slug rankings from a trained model, by aggregation or direct scores."""
    rankings: dict[str, ScoredRanking] = {}
    for s in sorted(slug_ids):
        members = corpus.slugs[s].members
        if family == "nprm":
            rankings[s] = rank_nprm(params, RankingInput(list(members), corpus))
        elif family == "ranksvm":
            rankings[s] = rank_ranksvm(params, RankingInput(list(members), corpus))
        else:
            scores = _doc_scores(family, params, corpus, list(members))
            rankings[s] = rank_by_scores({d: float(v) for d, v in zip(members, scores)})
    return rankings


def attach_task_metrics(family: str, params: object, corpus: Corpus, slug_ids: list[str],
                        report: MetricReport) -> None:
    """Attach regression or classification metrics over the evaluated documents."""
    if family not in ("ols", "mlp-regressor", "classifier"):
        return
    docs = [d for s in sorted(slug_ids) for d in corpus.slugs[s].members]
    truth = corpus.levels(docs)
    preds = _doc_scores(family, params, corpus, docs)
    if family == "classifier":
        report.classification = classification_metrics(truth.tolist(), preds.tolist())
    else:
        report.regression = regression_metrics(truth, preds)


def run_cv(cfg: ExperimentConfig, corpus: Corpus | None = None) -> ExperimentReport:
    """K-fold cross-validation over slugs; per-fold summaries plus a pooled report."""
    if corpus is None:
        if not cfg.corpus:
            raise ValidationError("config needs a corpus path (or pass a corpus object)")
        corpus = load_featurized(cfg.corpus, cfg.embeddings)
    if not corpus.featurized:
        raise ValidationError("corpus must be featurized")
    plan = make_folds(corpus, cfg.k, cfg.seed)
    all_slugs = set(corpus.rankable_slugs())
    pooled_rankings: dict[str, ScoredRanking] = {}
    fold_entries: list[dict] = []
    doc_truth: list[float] = []
    doc_pred: list[float] = []
    for fold_idx, test_slugs in enumerate(plan.folds):
        train_slugs = sorted(all_slugs - set(test_slugs))
        seed = cfg.seed + fold_idx
        try:
            params, n_pairs = _train_family(cfg.family, corpus, train_slugs, cfg, seed)
        except Exception as exc:
            exc.args = (f"fold {fold_idx}: {exc}",)
            raise
        fold_rankings = rankings_for(cfg.family, params, corpus, test_slugs)
        pooled_rankings.update(fold_rankings)
        fold_report = evaluate_corpus(fold_rankings, corpus, slugs=test_slugs,
                                      gain=cfg.gain, log_base=cfg.log_base)
        fold_entries.append({
            "fold": fold_idx,
            "seed": seed,
            "train_slugs": train_slugs,
            "test_slugs": list(test_slugs),
            "n_train_pairs": n_pairs,
            "aggregates": fold_report.aggregates,
        })
        if cfg.family in ("ols", "mlp-regressor", "classifier"):
            docs = [d for s in test_slugs for d in corpus.slugs[s].members]
            doc_truth.extend(corpus.levels(docs).tolist())
            doc_pred.extend(_doc_scores(cfg.family, params, corpus, docs).tolist())
    pooled = evaluate_corpus(pooled_rankings, corpus, gain=cfg.gain, log_base=cfg.log_base)
    if doc_truth:
        if cfg.family == "classifier":
            pooled.classification = classification_metrics(doc_truth, doc_pred)
        else:
            pooled.regression = regression_metrics(doc_truth, doc_pred)
    return ExperimentReport(mode="cv", config=cfg.to_dict(), metrics=pooled, folds=fold_entries)


def _run_transfer(cfg: ExperimentConfig, mode: str, train_corpus: Corpus | None,
                  test_corpus: Corpus | None) -> ExperimentReport:
    if train_corpus is None:
        if not cfg.corpus:
            raise ValidationError("config needs a training corpus path (or pass a corpus object)")
        train_corpus = load_featurized(cfg.corpus, cfg.embeddings)
    if test_corpus is None:
        if not cfg.test_corpus:
            raise ValidationError(f"{mode} mode requires a test corpus")
        test_corpus = load_featurized(cfg.test_corpus, cfg.test_embeddings or cfg.embeddings)
    if not (train_corpus.featurized and test_corpus.featurized):
        raise ValidationError("both corpora must be featurized")
    if train_corpus.dim != test_corpus.dim:
        raise ValidationError(
            f"embedding dimension mismatch: train {train_corpus.dim} vs test {test_corpus.dim}"
        )
    train_slugs = train_corpus.rankable_slugs()
    if not train_slugs:
        raise ValidationError("training corpus has no rankable slugs")
    params, n_pairs = _train_family(cfg.family, train_corpus, train_slugs, cfg, cfg.seed)
    test_slugs = test_corpus.rankable_slugs()
    if not test_slugs:
        raise ValidationError("test corpus has no rankable slugs")
    rankings = rankings_for(cfg.family, params, test_corpus, test_slugs)
    report = evaluate_corpus(rankings, test_corpus, gain=cfg.gain, log_base=cfg.log_base)
    attach_task_metrics(cfg.family, params, test_corpus, test_slugs, report)
    exp = ExperimentReport(
        mode=mode,
        config=cfg.to_dict(),
        metrics=report,
        folds=[{
            "fold": 0,
            "seed": cfg.seed,
            "train_slugs": train_slugs,
            "test_slugs": test_slugs,
            "n_train_pairs": n_pairs,
            "aggregates": report.aggregates,
        }],
    )
    if mode == "cross_lingual":
        exp.languages = {"train": train_corpus.langs(), "test": test_corpus.langs()}
        ra = report.aggregates.get("ra")
        if ra is not None and ra < CROSS_LINGUAL_RA_FLOOR:
            msg = (
                f"cross-lingual ranking accuracy {ra:.3f} is below {CROSS_LINGUAL_RA_FLOOR}; "
                "the embedding spaces may not be aligned"
            )
            exp.warnings.append(msg)
            log.warning(msg)
    return exp


def run_cross_corpus(cfg: ExperimentConfig, train_corpus: Corpus | None = None,
                     test_corpus: Corpus | None = None) -> ExperimentReport:
    """Train on every rankable train-corpus slug, evaluate on the test corpus as-is."""
    return _run_transfer(cfg, "cross_corpus", train_corpus, test_corpus)


def run_cross_lingual(cfg: ExperimentConfig, train_corpus: Corpus | None = None,
                      test_corpus: Corpus | None = None) -> ExperimentReport:
    """Cross-corpus mechanics over aligned multilingual spaces, tagged by language.

    Warns (in the report and the log) when ranking accuracy lands below
    0.6, the usual symptom of unaligned embedding spaces.
    """
    return _run_transfer(cfg, "cross_lingual", train_corpus, test_corpus)
