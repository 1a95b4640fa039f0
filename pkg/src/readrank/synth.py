"""Synthetic leveled corpora for exercising the toolkit without licensed data.

Documents are random vectors with slug structure: each slug has a topic
offset shared by its members, members step along a hidden difficulty
direction, and every reading level is a fixed linear functional of the
document vector plus Gaussian noise (an optional slug-level noise component
models per-source grade miscalibration; it never changes within-slug
order). A paired test corpus can be rotated, either by a fixed angle (an
isoclinic rotation that turns every direction by that angle, a controlled
distribution shift) or by a full random rotation (an unaligned embedding
space).

With ``vocab_size`` set, the generator instead emits token texts plus a
matching embedding table whose averaged vectors reproduce the same
structure, so the featurize path can be exercised end to end.
"""

from __future__ import annotations

import math

import numpy as np

from .corpus import Corpus, Document, EmbeddingTable, build_corpus, embed_document
from .errors import ValidationError

_SPACE_STREAM = 714025
_ROTATION_STREAM = 912001
_VOCAB_STREAM = 535509

#: Generator defaults; chosen so that within-corpus ranking sits near the
#: ceiling while cross-slug level variance dominates the intra-slug gaps.
TOPIC_SCALE = 3.0
LEVEL_GAP = 1.0
JITTER = 0.2


def _unit(v: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValidationError("degenerate zero direction")
    return v / norm


def isoclinic_rotation(dim: int, degrees: float) -> np.ndarray:
    """Rotation turning every direction by ``degrees``: paired-plane blocks.

    Dimension i rotates with dimension i + dim//2; an odd trailing
    dimension stays fixed. Needs dim >= 2.
    """
    if dim < 2:
        raise ValidationError("angle rotation needs dim >= 2")
    theta = math.radians(degrees)
    rot = np.eye(dim)
    half = dim // 2
    for i in range(half):
        j = i + half
        rot[i, i] = rot[j, j] = math.cos(theta)
        rot[i, j] = -math.sin(theta)
        rot[j, i] = math.sin(theta)
    return rot


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR of a Gaussian with sign fix)."""
    a = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def _resolve_rotation(rotation, dim: int, space_seed: int) -> tuple[np.ndarray | None, str | float | None]:
    if rotation is None:
        return None, None
    if isinstance(rotation, str):
        if rotation != "random":
            try:
                rotation = float(rotation)
            except ValueError:
                raise ValidationError(
                    f"rotation must be a number of degrees or 'random', got {rotation!r}"
                ) from None
            return _resolve_rotation(rotation, dim, space_seed)
        rng = np.random.default_rng([space_seed, _ROTATION_STREAM])
        return random_rotation(dim, rng), "random"
    degrees = float(rotation)
    if degrees == 0.0:
        return None, 0.0
    return isoclinic_rotation(dim, degrees), degrees


def generate_corpus(
    n_slugs: int,
    levels_per_slug: int,
    dim: int,
    noise: float,
    seed: int,
    space_seed: int | None = None,
    rotation: float | str | None = None,
    lang: str = "en",
    slug_prefix: str = "slug",
    topic_scale: float = TOPIC_SCALE,
    level_gap: float = LEVEL_GAP,
    jitter: float = JITTER,
    slug_noise: float = 0.0,
    vocab_size: int = 0,
    tokens_per_doc: int = 40,
) -> tuple[Corpus, dict, EmbeddingTable | None]:
    """Generate a corpus whose levels follow a hidden linear functional.

    Returns (corpus, truth, table). ``truth`` records the functional in the
    emitted space (after any rotation) for audit; ``table`` is None unless
    ``vocab_size`` > 0. Corpora sharing ``space_seed`` live in the same
    latent space, so train/test pairs for cross-corpus and cross-lingual
    experiments stay comparable.

    ``slug_noise`` adds one shared Gaussian offset to every level in a
    slug, modeling per-source miscalibration of the grade scale; it leaves
    within-slug orderings untouched.
    """
    if n_slugs < 1 or levels_per_slug < 2 or dim < 1:
        raise ValidationError(
            f"invalid sizes: n_slugs={n_slugs}, levels_per_slug={levels_per_slug}, dim={dim}"
        )
    if noise < 0 or slug_noise < 0:
        raise ValidationError(f"noise terms must be >= 0, got {noise} / {slug_noise}")
    if vocab_size < 0 or tokens_per_doc < 1:
        raise ValidationError("vocab_size must be >= 0 and tokens_per_doc >= 1")

    ss = int(seed if space_seed is None else space_seed)
    srng = np.random.default_rng([ss, _SPACE_STREAM])
    w = _unit(srng.standard_normal(dim))
    rot, rot_label = _resolve_rotation(rotation, dim, ss)

    rng = np.random.default_rng(int(seed))
    width = max(5, len(str(n_slugs)))

    table: EmbeddingTable | None = None
    difficulty: dict[str, float] = {}
    if vocab_size > 0:
        table, difficulty = _make_vocab(vocab_size, dim, levels_per_slug, w, level_gap, ss)

    documents: list[Document] = []
    for s in range(n_slugs):
        slug_id = f"{slug_prefix}{s:0{width}d}"
        topic = topic_scale * rng.standard_normal(dim)
        offset = slug_noise * float(rng.standard_normal()) if slug_noise > 0 else 0.0
        for lvl in range(levels_per_slug):
            doc_id = f"{slug_id}-l{lvl}"
            if table is None:
                x = topic + level_gap * lvl * w + jitter * rng.standard_normal(dim)
                y = float(w @ x) + offset + noise * float(rng.standard_normal())
                vec = rot @ x if rot is not None else x
                documents.append(
                    Document(doc_id=doc_id, slug_id=slug_id, level=y, lang=lang, vector=vec.copy())
                )
            else:
                tokens = _sample_tokens(difficulty, lvl, tokens_per_doc, rng)
                x = embed_document(tokens, table)
                y = float(w @ x) + offset + noise * float(rng.standard_normal())
                documents.append(
                    Document(doc_id=doc_id, slug_id=slug_id, level=y, lang=lang, text=" ".join(tokens))
                )
    if table is not None and rot is not None:
        table = EmbeddingTable(vocab={t: rot @ v for t, v in table.vocab.items()}, dim=dim)

    corpus = build_corpus(documents)
    w_effective = rot @ w if rot is not None else w
    truth = {
        "functional": [float(v) for v in w_effective],
        "latent_functional": [float(v) for v in w],
        "dim": int(dim),
        "n_slugs": int(n_slugs),
        "levels_per_slug": int(levels_per_slug),
        "noise": float(noise),
        "slug_noise": float(slug_noise),
        "seed": int(seed),
        "space_seed": ss,
        "rotation": rot_label,
        "lang": lang,
        "topic_scale": float(topic_scale),
        "level_gap": float(level_gap),
        "jitter": float(jitter),
        "mode": "text" if table is not None else "vector",
    }
    return corpus, truth, table


def _make_vocab(vocab_size: int, dim: int, levels: int, w: np.ndarray,
                level_gap: float, space_seed: int) -> tuple[EmbeddingTable, dict[str, float]]:
    vrng = np.random.default_rng([space_seed, _VOCAB_STREAM])
    width = len(str(vocab_size))
    vocab: dict[str, np.ndarray] = {}
    difficulty: dict[str, float] = {}
    values = vrng.uniform(0.0, levels - 1.0, size=vocab_size)
    for i in range(vocab_size):
        token = f"tok{i:0{width}d}"
        vocab[token] = level_gap * values[i] * w + 0.5 * vrng.standard_normal(dim)
        difficulty[token] = float(values[i])
    return EmbeddingTable(vocab=vocab, dim=dim), difficulty


def _sample_tokens(difficulty: dict[str, float], level: int, k: int,
                   rng: np.random.Generator) -> list[str]:
    tokens = sorted(difficulty)
    d = np.array([difficulty[t] for t in tokens])
    weights = np.exp(-((d - level) ** 2) / (2 * 0.3**2))
    weights /= weights.sum()
    idx = rng.choice(len(tokens), size=k, replace=True, p=weights)
    return [tokens[i] for i in idx]
