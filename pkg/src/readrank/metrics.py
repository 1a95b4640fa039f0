"""Ranking, classification, and regression metrics with explicit tie rules.

Per-slug ranking metrics compare ground-truth reading levels against model
scores for the same documents:

* NDCG uses the (non-negative) truth level as a linear gain with a log2
  position discount; documents tied on predicted score contribute the mean
  gain of their tied block at each of the block's positions, which equals
  the average of plain NDCG over all orderings of the tie.
* Spearman correlates average ranks on both sides.
* Kendall is tau-b, which discounts pairs tied on either side.
* Ranking accuracy is all-or-nothing: 1 only when every strictly harder
  document scores strictly higher; predicted ties across distinct truth
  levels fail, ties within a truth level are free.

Correlations are undefined when one side is constant; undefined values are
excluded from aggregate means and counted instead of being coerced to 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus
from .errors import MetricUndefinedError, ValidationError
from .ranker import ScoredRanking

GAINS = ("linear", "exp")


@dataclass
class SlugEvaluation:
    """Aligned truth levels and predicted scores for one slug's documents."""

    slug_id: str
    truth_levels: Sequence[float]
    pred_scores: Sequence[float]

    def __post_init__(self) -> None:
        t = np.asarray(self.truth_levels, dtype=float)
        p = np.asarray(self.pred_scores, dtype=float)
        if t.shape != p.shape or t.ndim != 1:
            raise ValidationError(f"slug '{self.slug_id}': truth/pred shapes differ: {t.shape} vs {p.shape}")
        if t.size < 2:
            raise ValidationError(f"slug '{self.slug_id}': need at least 2 documents, got {t.size}")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
            raise ValidationError(f"slug '{self.slug_id}': non-finite value in truth or predictions")
        self.truth_levels = t
        self.pred_scores = p


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks in ascending value order, averaging over tied groups."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=float)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _discounts(n: int, log_base: float) -> np.ndarray:
    positions = np.arange(1, n + 1, dtype=float)
    return math.log(log_base) / np.log(positions + 1.0)


def _gains(levels: np.ndarray, gain: str) -> np.ndarray:
    if gain == "linear":
        return levels.astype(float)
    if gain == "exp":
        return np.power(2.0, levels) - 1.0
    raise ValidationError(f"unknown gain '{gain}' (choose from {GAINS})")


def ndcg(ev: SlugEvaluation, gain: str = "linear", log_base: float = 2.0) -> float:
    """Tie-averaged NDCG of the predicted ordering against truth gains."""
    truth = np.asarray(ev.truth_levels, dtype=float)
    pred = np.asarray(ev.pred_scores, dtype=float)
    if np.any(truth < 0):
        raise ValidationError(
            f"slug '{ev.slug_id}': negative truth levels; shift levels to be non-negative first"
        )
    rel = _gains(truth, gain)
    n = truth.size
    disc = _discounts(n, log_base)
    ideal = float(np.sort(rel)[::-1] @ disc)
    if ideal == 0.0:
        raise MetricUndefinedError(f"slug '{ev.slug_id}': all-zero gains give an undefined NDCG")
    order = sorted(range(n), key=lambda i: -pred[i])
    dcg = 0.0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and pred[order[j + 1]] == pred[order[i]]:
            j += 1
        block = [order[k] for k in range(i, j + 1)]
        mean_rel = float(np.mean(rel[block]))
        dcg += mean_rel * float(disc[i:j + 1].sum())
        i = j + 1
    return dcg / ideal


def spearman(ev: SlugEvaluation) -> float:
    """Pearson correlation of average ranks (rank correlation with tie averaging)."""
    truth = np.asarray(ev.truth_levels, dtype=float)
    pred = np.asarray(ev.pred_scores, dtype=float)
    if np.ptp(truth) == 0.0:
        raise MetricUndefinedError(f"slug '{ev.slug_id}': constant truth levels, correlation undefined")
    if np.ptp(pred) == 0.0:
        raise MetricUndefinedError(f"slug '{ev.slug_id}': constant predictions, correlation undefined")
    rt = average_ranks(truth)
    rp = average_ranks(pred)
    dt = rt - rt.mean()
    dp = rp - rp.mean()
    r = float((dt @ dp) / math.sqrt((dt @ dt) * (dp @ dp)))
    return min(1.0, max(-1.0, r))


def kendall(ev: SlugEvaluation) -> float:
    """Kendall tau-b; pairs tied on either side reduce the normalizer."""
    truth = np.asarray(ev.truth_levels, dtype=float)
    pred = np.asarray(ev.pred_scores, dtype=float)
    n = truth.size
    iu = np.triu_indices(n, 1)
    dt = np.sign(truth[:, None] - truth[None, :])[iu]
    dp = np.sign(pred[:, None] - pred[None, :])[iu]
    prod = dt * dp
    concordant = int(np.sum(prod > 0))
    discordant = int(np.sum(prod < 0))
    tied_truth = int(np.sum(dt == 0))
    tied_pred = int(np.sum(dp == 0))
    n0 = n * (n - 1) // 2
    denom = math.sqrt((n0 - tied_truth) * (n0 - tied_pred))
    if denom == 0.0:
        raise MetricUndefinedError(f"slug '{ev.slug_id}': tau-b denominator is zero")
    tau = (concordant - discordant) / denom
    return min(1.0, max(-1.0, tau))


def ranking_accuracy(ev: SlugEvaluation) -> int:
    """1 iff every pair with distinct truth levels is strictly ordered correctly.

    This makes any predicted tie across different truth levels fail, and
    forces documents sharing a truth level to sit together as a block.
    """
    truth = np.asarray(ev.truth_levels, dtype=float)
    pred = np.asarray(ev.pred_scores, dtype=float)
    higher = truth[:, None] > truth[None, :]
    ordered = pred[:, None] > pred[None, :]
    return 0 if bool(np.any(higher & ~ordered)) else 1


def classification_metrics(truth: Sequence, pred: Sequence) -> dict[str, float]:
    """Exact-match accuracy and support-weighted F1.

    Labels are compared by equality; a class's F1 is 0 when precision and
    recall are both 0.
    """
    truth = list(truth)
    pred = list(pred)
    if len(truth) != len(pred):
        raise ValidationError(f"label lengths differ: {len(truth)} vs {len(pred)}")
    if not truth:
        raise ValidationError("cannot score empty label lists")
    n = len(truth)
    accuracy = sum(t == p for t, p in zip(truth, pred)) / n
    weighted_f1 = 0.0
    for cls in sorted(set(truth)):
        tp = sum(1 for t, p in zip(truth, pred) if t == cls and p == cls)
        fp = sum(1 for t, p in zip(truth, pred) if t != cls and p == cls)
        fn = sum(1 for t, p in zip(truth, pred) if t == cls and p != cls)
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / support if support > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        weighted_f1 += (support / n) * f1
    return {"accuracy": float(accuracy), "weighted_f1": float(weighted_f1)}


def regression_metrics(truth: Sequence[float], pred: Sequence[float]) -> dict[str, float]:
    """Mean absolute and mean squared error."""
    t = np.asarray(truth, dtype=float)
    p = np.asarray(pred, dtype=float)
    if t.shape != p.shape or t.ndim != 1:
        raise ValidationError(f"truth/pred shapes differ: {t.shape} vs {p.shape}")
    if t.size == 0:
        raise ValidationError("cannot score empty value lists")
    err = p - t
    return {"mae": float(np.mean(np.abs(err))), "mse": float(np.mean(err * err))}


@dataclass
class MetricReport:
    """Per-slug ranking metrics plus aggregates and optional task blocks.

    ``per_slug`` values hold None where a metric is undefined for that
    slug; aggregates are means over the defined values, with the undefined
    counts reported alongside.
    """

    per_slug: dict[str, dict]
    aggregates: dict
    undefined: dict
    options: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    classification: dict | None = None
    regression: dict | None = None

    def recompute_aggregates(self) -> dict:
        return _aggregate(self.per_slug)

    def to_dict(self) -> dict:
        doc = {
            "per_slug": self.per_slug,
            "aggregates": self.aggregates,
            "undefined": self.undefined,
            "options": self.options,
            "warnings": list(self.warnings),
        }
        if self.classification is not None:
            doc["classification"] = self.classification
        if self.regression is not None:
            doc["regression"] = self.regression
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "MetricReport":
        if "per_slug" not in doc or "aggregates" not in doc:
            raise ValidationError("not a metric report: missing per_slug/aggregates")
        return cls(
            per_slug=dict(doc["per_slug"]),
            aggregates=dict(doc["aggregates"]),
            undefined=dict(doc.get("undefined", {})),
            options=dict(doc.get("options", {})),
            warnings=list(doc.get("warnings", [])),
            classification=doc.get("classification"),
            regression=doc.get("regression"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _aggregate(per_slug: Mapping[str, Mapping]) -> dict:
    agg: dict = {"n_slugs": len(per_slug)}
    for key in ("ndcg", "src", "ktcc"):
        defined = [row[key] for row in per_slug.values() if row.get(key) is not None]
        agg[key] = float(np.mean(defined)) if defined else None
    ras = [row["ra"] for row in per_slug.values()]
    agg["ra"] = float(np.mean(ras)) if ras else None
    return agg


def evaluate_corpus(
    rankings: Mapping[str, ScoredRanking],
    corpus: Corpus,
    slugs: Sequence[str] | None = None,
    gain: str = "linear",
    log_base: float = 2.0,
) -> MetricReport:
    """Score per-slug rankings against the corpus ground truth.

    Every rankable slug in scope must have a ranking covering exactly its
    members. When the corpus contains negative levels, all truth levels are
    shifted up by the corpus minimum before NDCG (gains must be
    non-negative); the shift is recorded in the report options.
    """
    slug_ids = sorted(slugs) if slugs is not None else corpus.rankable_slugs()
    warnings: list[str] = []
    for s in slug_ids:
        if s not in corpus.slugs:
            raise ValidationError(f"unknown slug '{s}'")
        if not corpus.slugs[s].rankable:
            raise ValidationError(f"slug '{s}' is not rankable")
        if s not in rankings:
            raise ValidationError(f"missing ranking for slug '{s}'")
    min_level = min((doc.level for doc in corpus.documents.values()), default=0.0)
    shift = -min_level if min_level < 0 else 0.0
    if shift:
        warnings.append(f"levels shifted by +{shift:g} for NDCG gains (corpus minimum was negative)")

    per_slug: dict[str, dict] = {}
    undefined = {"ndcg": 0, "src": 0, "ktcc": 0}
    n_tied_truth = 0
    for s in slug_ids:
        members = corpus.slugs[s].members
        ranking = rankings[s]
        if set(ranking.scores) != set(members):
            raise ValidationError(f"ranking for slug '{s}' does not cover exactly its documents")
        truth = corpus.levels(members) + shift
        pred = np.array([ranking.scores[d] for d in members], dtype=float)
        ev = SlugEvaluation(s, truth, pred)
        row: dict = {"n_docs": len(members)}
        try:
            row["ndcg"] = float(ndcg(ev, gain=gain, log_base=log_base))
        except MetricUndefinedError:
            row["ndcg"] = None
            undefined["ndcg"] += 1
        try:
            row["src"] = float(spearman(ev))
        except MetricUndefinedError:
            row["src"] = None
            undefined["src"] += 1
        try:
            row["ktcc"] = float(kendall(ev))
        except MetricUndefinedError:
            row["ktcc"] = None
            undefined["ktcc"] += 1
        row["ra"] = int(ranking_accuracy(ev))
        if len(set(truth.tolist())) < len(members):
            n_tied_truth += 1
        per_slug[s] = row
    if n_tied_truth:
        warnings.append(
            f"{n_tied_truth} slug(s) have tied ground-truth levels; "
            "ranking accuracy treats tied documents as an order-free block"
        )
    return MetricReport(
        per_slug=per_slug,
        aggregates=_aggregate(per_slug),
        undefined=undefined,
        options={"gain": gain, "log_base": float(log_base), "level_shift": float(shift)},
        warnings=warnings,
    )
