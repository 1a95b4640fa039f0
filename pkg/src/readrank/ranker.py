"""Turn trained models into rankings of document lists.

Pairwise models rank a list by score aggregation: each document's score is
the sum of its s1 (or decision-value) outputs against every other document
in the list, and the list is sorted by score descending. Regression and
classification models rank directly by their per-document scores, with
ties passed through untouched for the metrics layer to interpret.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .corpus import Corpus
from .errors import ValidationError
from .models import LinearParams, MlpParams, nprm_pair_scores, ranksvm_pair_scores


@dataclass
class RankingInput:
    """A list of at least two featurized documents to be ranked."""

    doc_ids: list[str]
    corpus: Corpus

    def __post_init__(self) -> None:
        if len(self.doc_ids) < 2:
            raise ValidationError("ranking needs a minimum of two texts")
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise ValidationError("ranking input contains duplicate doc_ids")
        for d in self.doc_ids:
            doc = self.corpus.documents.get(d)
            if doc is None:
                raise ValidationError(f"unknown doc_id '{d}'")
            if doc.vector is None:
                raise ValidationError(f"doc '{d}' has no vector; featurize the corpus first")


@dataclass
class ScoredRanking:
    """Per-document scores and the induced descending order.

    Exact score ties are broken by doc_id ascending in ``order``; the tied
    scores themselves are preserved for tie-aware metrics.
    """

    scores: dict[str, float]
    order: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.order:
            self.order = _descending_order(self.scores)


def _descending_order(scores: Mapping[str, float]) -> list[str]:
    return sorted(scores, key=lambda d: (-scores[d], d))


def rank_by_scores(scores: Mapping[str, float]) -> ScoredRanking:
    """Rank documents by externally computed scores, keeping ties as ties."""
    if not scores:
        raise ValidationError("cannot rank an empty score map")
    clean: dict[str, float] = {}
    for doc_id, value in scores.items():
        v = float(value)
        if not np.isfinite(v):
            raise ValidationError(f"non-finite score for doc '{doc_id}'")
        clean[doc_id] = v
    return ScoredRanking(scores=clean)


PairScoreFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _rank_pairwise(score_fn: PairScoreFn, rinput: RankingInput) -> ScoredRanking:
    # fixed doc-id order for the pair batch and the accumulation makes the
    # result independent of the input list order, bit for bit
    ids = sorted(rinput.doc_ids)
    x = rinput.corpus.vector_matrix(ids)
    n = len(ids)
    left_idx = []
    right_idx = []
    for a in range(n):
        for b in range(n):
            if a != b:
                left_idx.append(a)
                right_idx.append(b)
    s = score_fn(x[left_idx], x[right_idx])
    totals = np.zeros(n)
    for k, a in enumerate(left_idx):
        totals[a] += s[k]
    return rank_by_scores({ids[i]: float(totals[i]) for i in range(n)})


def rank_nprm(params: MlpParams, rinput: RankingInput) -> ScoredRanking:
    """Aggregate s1 pair scores into per-document totals and sort descending.

    Each total sums S-1 values strictly inside (0, 1), so it lies strictly
    inside (0, S-1) for a list of size S.
    """
    return _rank_pairwise(lambda xi, xj: nprm_pair_scores(params, xi, xj), rinput)


def rank_ranksvm(params: LinearParams, rinput: RankingInput) -> ScoredRanking:
    """Aggregate rank-SVM decision values the same way the pair scorer is aggregated."""
    return _rank_pairwise(lambda xi, xj: ranksvm_pair_scores(params, xi, xj), rinput)
