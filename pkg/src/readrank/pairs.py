"""Construction of the ordered-pair training set from a slug-grouped corpus.

Every unordered pair of retained documents inside a slug contributes both
orderings, labeled [1, 0] when the left level is >= the right level and
[0, 1] otherwise. Pairs never cross slug boundaries. Slugs with more than
``m`` levels are thinned to the highest-level document, the lowest-level
document, and ``m - 2`` documents drawn uniformly from strictly
intermediate levels.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Corpus, Slug
from .errors import ValidationError

Label = tuple[int, int]


def pair_label(level_left: float, level_right: float) -> Label:
    """[1, 0] iff level_left >= level_right, else [0, 1]."""
    return (1, 0) if level_left >= level_right else (0, 1)


@dataclass(frozen=True)
class PairExample:
    """One ordered document pair with its two-way preference label."""

    left: str
    right: str
    label: Label


@dataclass
class PairSet:
    """All training pairs plus provenance (source slugs, subsampling width)."""

    pairs: list[PairExample]
    source_slugs: list[str]
    m: int

    def __len__(self) -> int:
        return len(self.pairs)

    def doc_ids(self) -> set[str]:
        out: set[str] = set()
        for p in self.pairs:
            out.add(p.left)
            out.add(p.right)
        return out


def _slug_rng(seed: int, slug_id: str) -> np.random.Generator:
    # keyed per slug so draws are independent of slug iteration order
    return np.random.default_rng([int(seed), zlib.crc32(slug_id.encode("utf-8"))])


def subsample_slug(slug: Slug, corpus: Corpus, m: int, seed: int) -> list[str]:
    """Pick at most ``m`` documents from a slug for pair construction.

    Keeps everything when the slug has <= m members. Otherwise keeps the
    highest- and lowest-level documents (ties broken by smallest doc_id)
    and samples the remaining slots uniformly, without replacement, from
    documents at strictly intermediate levels. Deterministic for a fixed
    seed. Slugs where every level is equal keep their first ``m`` members
    in doc_id order.
    """
    if m < 2:
        raise ValidationError(f"m must be >= 2, got {m}")
    members = list(slug.members)
    if len(members) < 2:
        raise ValidationError(f"slug '{slug.slug_id}' has {len(members)} document(s); not rankable")
    if len(members) <= m:
        return members
    levels = {d: corpus.documents[d].level for d in members}
    lo = min(levels.values())
    hi = max(levels.values())
    if lo == hi:
        return sorted(members)[:m]
    hi_doc = min(d for d in members if levels[d] == hi)
    lo_doc = min(d for d in members if levels[d] == lo)
    between = sorted(d for d in members if lo < levels[d] < hi)
    n_mid = min(m - 2, len(between))
    mid: list[str] = []
    if n_mid > 0:
        rng = _slug_rng(seed, slug.slug_id)
        picked = rng.choice(len(between), size=n_mid, replace=False)
        mid = [between[i] for i in sorted(picked)]
    chosen = {hi_doc, lo_doc, *mid}
    return [d for d in members if d in chosen]


def build_pairset(corpus: Corpus, m: int = 3, seed: int = 0) -> PairSet:
    """Build the full ordered-pair set over every rankable slug.

    A slug that retains k documents contributes k*(k-1) ordered pairs.
    Output order is canonical (slug, then left, then right), so the result
    is byte-stable for a fixed (corpus, m, seed).
    """
    if not corpus.featurized:
        raise ValidationError("corpus must be featurized before building pairs")
    rankable = corpus.rankable_slugs()
    if not rankable:
        raise ValidationError("corpus has no rankable slugs (need at least 2 documents in a slug)")
    pairs: list[PairExample] = []
    for slug_id in rankable:
        kept = sorted(subsample_slug(corpus.slugs[slug_id], corpus, m, seed))
        for left in kept:
            for right in kept:
                if left == right:
                    continue
                label = pair_label(corpus.documents[left].level, corpus.documents[right].level)
                pairs.append(PairExample(left=left, right=right, label=label))
    return PairSet(pairs=pairs, source_slugs=rankable, m=m)


def dump_pairset(pairset: PairSet, corpus: Corpus, path: str | Path) -> None:
    """Write pairs as line-delimited JSON ``{slug, left, right, label}`` for audit."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for p in pairset.pairs:
            rec = {
                "slug": corpus.documents[p.left].slug_id,
                "left": p.left,
                "right": p.right,
                "label": list(p.label),
            }
            fh.write(json.dumps(rec, ensure_ascii=False))
            fh.write("\n")


def pair_arrays(pairset: PairSet, corpus: Corpus) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vector views of a pair set: left matrix, right matrix, one-hot labels."""
    lefts = [p.left for p in pairset.pairs]
    rights = [p.right for p in pairset.pairs]
    xi = corpus.vector_matrix(lefts)
    xj = corpus.vector_matrix(rights)
    y = np.array([p.label for p in pairset.pairs], dtype=float)
    return xi, xj, y


def pair_accuracy(scores_s1: Sequence[float], pairset: PairSet) -> float:
    """Fraction of pairs whose s1 score lands on the labeled side of 0.5."""
    if len(scores_s1) != len(pairset.pairs):
        raise ValidationError("score/pair length mismatch")
    hits = 0
    for s, p in zip(scores_s1, pairset.pairs):
        want_hi = p.label == (1, 0)
        hits += int((s > 0.5) == want_hi)
    return hits / len(pairset.pairs)
