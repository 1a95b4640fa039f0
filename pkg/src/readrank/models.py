"""Trainable scorers: the neural pairwise ranking scorer and the baselines.

The pair scorer feeds a combined view of two document vectors through one
hidden ReLU layer and a two-way softmax head; s1 estimates P(level_i >
level_j). It trains with plain SGD on the pairwise logistic loss (softmax
cross-entropy over the two-way preference label). Baselines: a linear
rank-SVM on difference features (hinge loss, subgradient SGD), ordinary
least squares via the normal equations, a one-hidden-layer MSE regressor,
and a softmax classifier over the observed level set.

All training is deterministic for a fixed seed, and every analytic
gradient is exact for the stated objective (checked against central finite
differences in the test suite).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Corpus
from .errors import TrainingDivergedError, ValidationError
from .pairs import PairExample, PairSet, pair_arrays

COMBINERS = ("concat-diff", "concat")
MODEL_FAMILIES = ("nprm", "ranksvm", "ols", "mlp-regressor", "classifier")

# probabilities are kept this far inside (0, 1) so logs and aggregated
# scores stay strictly bounded
_SCORE_FLOOR = 1e-12


@dataclass
class TrainConfig:
    """Hyperparameters for SGD training; also records the combiner choice."""

    learning_rate: float = 0.05
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    hidden: int = 64
    l2: float = 1e-4
    combiner: str = "concat-diff"

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValidationError(f"epochs must be an integer >= 1, got {self.epochs}")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ValidationError(f"batch_size must be an integer >= 1, got {self.batch_size}")
        if int(self.hidden) != self.hidden or self.hidden < 1:
            raise ValidationError(f"hidden must be an integer >= 1, got {self.hidden}")
        if self.l2 < 0:
            raise ValidationError(f"l2 must be >= 0, got {self.l2}")
        if self.combiner not in COMBINERS:
            raise ValidationError(f"unknown combiner '{self.combiner}' (choose from {COMBINERS})")

    def to_dict(self) -> dict:
        return {
            "learning_rate": float(self.learning_rate),
            "epochs": int(self.epochs),
            "batch_size": int(self.batch_size),
            "seed": int(self.seed),
            "hidden": int(self.hidden),
            "l2": float(self.l2),
            "combiner": self.combiner,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValidationError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class MlpParams:
    """Weights of a one-hidden-layer ReLU network.

    ``combiner`` is set on pair scorers, ``class_levels`` on classifiers
    (ascending level value per output index); both are None otherwise.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    combiner: str | None = None
    class_levels: tuple[float, ...] | None = None

    @property
    def d_in(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def d_out(self) -> int:
        return self.w2.shape[1]

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.w1, self.b1, self.w2, self.b2)

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


@dataclass
class LinearParams:
    """Weight vector and intercept of a linear model."""

    w: np.ndarray
    b: float


@dataclass(frozen=True)
class PairScore:
    """Two-way softmax output for an ordered pair; s1 estimates P(y_i > y_j)."""

    s1: float
    s2: float

    def __post_init__(self) -> None:
        if not (0.0 < self.s1 < 1.0 and 0.0 < self.s2 < 1.0):
            raise ValidationError(f"pair scores must lie strictly inside (0, 1): ({self.s1}, {self.s2})")
        if abs(self.s1 + self.s2 - 1.0) > 1e-9:
            raise ValidationError(f"pair scores must sum to 1: ({self.s1}, {self.s2})")


def init_mlp(
    d_in: int,
    hidden: int,
    d_out: int,
    rng: np.random.Generator,
    combiner: str | None = None,
    class_levels: tuple[float, ...] | None = None,
) -> MlpParams:
    """Seeded uniform(+-1/sqrt(fan_in)) initialization for weights and biases."""
    bound1 = 1.0 / math.sqrt(d_in)
    bound2 = 1.0 / math.sqrt(hidden)
    return MlpParams(
        w1=rng.uniform(-bound1, bound1, size=(d_in, hidden)),
        b1=rng.uniform(-bound1, bound1, size=hidden),
        w2=rng.uniform(-bound2, bound2, size=(hidden, d_out)),
        b2=rng.uniform(-bound2, bound2, size=d_out),
        combiner=combiner,
        class_levels=class_levels,
    )


# ---------------------------------------------------------------------------
# pair features and the pair scorer forward pass


def pair_features(x_i: Sequence[float], x_j: Sequence[float], combiner: str = "concat-diff") -> np.ndarray:
    """Joint encoding of an ordered vector pair.

    "concat-diff" gives [x_i ; x_j ; x_i - x_j]; "concat" gives [x_i ; x_j].
    """
    xi = np.asarray(x_i, dtype=float)
    xj = np.asarray(x_j, dtype=float)
    if xi.shape != xj.shape or xi.ndim != 1:
        raise ValidationError(f"pair feature dimension mismatch: {xi.shape} vs {xj.shape}")
    if combiner == "concat-diff":
        return np.concatenate([xi, xj, xi - xj])
    if combiner == "concat":
        return np.concatenate([xi, xj])
    raise ValidationError(f"unknown combiner '{combiner}' (choose from {COMBINERS})")


def _pair_feature_matrix(xi: np.ndarray, xj: np.ndarray, combiner: str) -> np.ndarray:
    if combiner == "concat-diff":
        return np.hstack([xi, xj, xi - xj])
    if combiner == "concat":
        return np.hstack([xi, xj])
    raise ValidationError(f"unknown combiner '{combiner}' (choose from {COMBINERS})")


def _forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    z1 = x @ params.w1 + params.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ params.w2 + params.b2
    return z1, a1, z2


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=1, keepdims=True)


def _clamp_prob(s: np.ndarray) -> np.ndarray:
    return np.clip(s, _SCORE_FLOOR, 1.0 - _SCORE_FLOOR)


def nprm_forward(params: MlpParams, x_i: Sequence[float], x_j: Sequence[float]) -> PairScore:
    """Score one ordered pair: softmax over the two output logits."""
    feats = pair_features(x_i, x_j, params.combiner or "concat-diff")
    if feats.size != params.d_in:
        raise ValidationError(f"feature size {feats.size} does not match model input size {params.d_in}")
    z1 = feats @ params.w1 + params.b1
    if not np.all(np.isfinite(z1)):
        raise ValidationError("non-finite values in hidden layer")
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ params.w2 + params.b2
    if not np.all(np.isfinite(z2)):
        raise ValidationError("non-finite values in output layer")
    d = z2[0] - z2[1]
    s1 = float(_clamp_prob(np.exp(-np.logaddexp(0.0, -d))))
    return PairScore(s1=s1, s2=1.0 - s1)


def nprm_pair_scores(params: MlpParams, xi: np.ndarray, xj: np.ndarray) -> np.ndarray:
    """Batched s1 scores for row-aligned matrices of left/right vectors."""
    x = _pair_feature_matrix(xi, xj, params.combiner or "concat-diff")
    _, _, z2 = _forward(params, x)
    d = z2[:, 0] - z2[:, 1]
    return _clamp_prob(np.exp(-np.logaddexp(0.0, -d)))


def pairwise_logistic_loss(score: PairScore, label: Sequence[int]) -> float:
    """Cross-entropy of a pair score against its one-hot preference label."""
    l1, l2 = label
    if (l1, l2) not in ((1, 0), (0, 1)):
        raise ValidationError(f"label must be [1, 0] or [0, 1], got {list(label)}")
    return float(-(l1 * math.log(score.s1) + l2 * math.log(score.s2)))


# ---------------------------------------------------------------------------
# losses and exact gradients


def _l2_penalty(params: MlpParams) -> float:
    return float(sum(np.sum(a * a) for a in params.arrays()))


def softmax_ce_loss(params: MlpParams, x: np.ndarray, y: np.ndarray, l2: float = 0.0) -> float:
    """Mean softmax cross-entropy over the batch, plus l2 * ||params||^2."""
    _, _, z2 = _forward(params, x)
    m = z2.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.sum(np.exp(z2 - m), axis=1))
    data = float(np.mean(lse - np.sum(z2 * y, axis=1)))
    return data + (l2 * _l2_penalty(params) if l2 > 0 else 0.0)


def _backward(params: MlpParams, x: np.ndarray, z1: np.ndarray, a1: np.ndarray,
              g2: np.ndarray, l2: float) -> MlpParams:
    gw2 = a1.T @ g2
    gb2 = g2.sum(axis=0)
    g1 = (g2 @ params.w2.T) * (z1 > 0.0)
    gw1 = x.T @ g1
    gb1 = g1.sum(axis=0)
    if l2 > 0:
        gw1 += 2.0 * l2 * params.w1
        gb1 += 2.0 * l2 * params.b1
        gw2 += 2.0 * l2 * params.w2
        gb2 += 2.0 * l2 * params.b2
    return MlpParams(w1=gw1, b1=gb1, w2=gw2, b2=gb2)


def softmax_ce_gradient(params: MlpParams, x: np.ndarray, y: np.ndarray, l2: float = 0.0) -> MlpParams:
    z1, a1, z2 = _forward(params, x)
    g2 = (_softmax_rows(z2) - y) / x.shape[0]
    return _backward(params, x, z1, a1, g2, l2)


def mse_loss(params: MlpParams, x: np.ndarray, y: np.ndarray, l2: float = 0.0) -> float:
    """Mean squared error of the single output, plus l2 * ||params||^2."""
    _, _, z2 = _forward(params, x)
    err = z2[:, 0] - y
    data = float(np.mean(err * err))
    return data + (l2 * _l2_penalty(params) if l2 > 0 else 0.0)


def mse_gradient(params: MlpParams, x: np.ndarray, y: np.ndarray, l2: float = 0.0) -> MlpParams:
    z1, a1, z2 = _forward(params, x)
    g2 = (2.0 * (z2[:, 0] - y) / x.shape[0])[:, None]
    return _backward(params, x, z1, a1, g2, l2)


def nprm_batch_loss(params: MlpParams, batch: Sequence[PairExample], corpus: Corpus, l2: float = 0.0) -> float:
    """Mean pairwise logistic loss of a batch of pairs (plus the l2 term)."""
    if not batch:
        raise ValidationError("batch must be non-empty")
    x, y = _batch_arrays(params, batch, corpus)
    return softmax_ce_loss(params, x, y, l2)


def nprm_gradient(params: MlpParams, batch: Sequence[PairExample], corpus: Corpus, l2: float = 0.0) -> MlpParams:
    """Exact gradient of the mean batch loss with respect to every parameter."""
    if not batch:
        raise ValidationError("batch must be non-empty")
    x, y = _batch_arrays(params, batch, corpus)
    return softmax_ce_gradient(params, x, y, l2)


def _batch_arrays(params: MlpParams, batch: Sequence[PairExample], corpus: Corpus) -> tuple[np.ndarray, np.ndarray]:
    xi = corpus.vector_matrix([p.left for p in batch])
    xj = corpus.vector_matrix([p.right for p in batch])
    x = _pair_feature_matrix(xi, xj, params.combiner or "concat-diff")
    y = np.array([p.label for p in batch], dtype=float)
    return x, y


# ---------------------------------------------------------------------------
# SGD driver


def _sgd_epochs(params: MlpParams, x: np.ndarray, y: np.ndarray, cfg: TrainConfig,
                rng: np.random.Generator, kind: str, what: str) -> list[float]:
    grad_fn = softmax_ce_gradient if kind == "softmax-ce" else mse_gradient
    loss_fn = softmax_ce_loss if kind == "softmax-ce" else mse_loss
    n = x.shape[0]
    history: list[float] = []
    lr = cfg.learning_rate
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            g = grad_fn(params, x[idx], y[idx], cfg.l2)
            params.w1 -= lr * g.w1
            params.b1 -= lr * g.b1
            params.w2 -= lr * g.w2
            params.b2 -= lr * g.b2
        loss = loss_fn(params, x, y, 0.0)
        if not math.isfinite(loss) or not params.all_finite():
            raise TrainingDivergedError(
                f"{what} training diverged at epoch {epoch + 1}; try a lower learning rate"
            )
        history.append(float(loss))
    return history


def train_nprm(pairset: PairSet, corpus: Corpus, cfg: TrainConfig) -> tuple[MlpParams, list[float]]:
    """Train the pair scorer with SGD; returns (params, per-epoch mean loss)."""
    if not pairset.pairs:
        raise ValidationError("pair set is empty")
    xi, xj, y = pair_arrays(pairset, corpus)
    x = _pair_feature_matrix(xi, xj, cfg.combiner)
    rng = np.random.default_rng(cfg.seed)
    params = init_mlp(x.shape[1], cfg.hidden, 2, rng, combiner=cfg.combiner)
    history = _sgd_epochs(params, x, y, cfg, rng, "softmax-ce", "pair scorer")
    return params, history


def train_regressor_mlp(corpus: Corpus, docs: Sequence[str], cfg: TrainConfig) -> tuple[MlpParams, list[float]]:
    """Train the one-output MSE regressor on document vectors."""
    if not docs:
        raise ValidationError("training document set is empty")
    x = corpus.vector_matrix(docs)
    y = corpus.levels(docs)
    rng = np.random.default_rng(cfg.seed)
    params = init_mlp(x.shape[1], cfg.hidden, 1, rng)
    history = _sgd_epochs(params, x, y, cfg, rng, "mse", "regressor")
    return params, history


def train_classifier(corpus: Corpus, docs: Sequence[str], cfg: TrainConfig) -> tuple[MlpParams, list[float]]:
    """Train a softmax classifier over the level values seen in training.

    Levels map to class indices in ascending order; the mapping is kept on
    the returned params so predictions can be reported on the level scale.
    """
    if not docs:
        raise ValidationError("training document set is empty")
    levels = corpus.levels(docs)
    classes = sorted(set(levels.tolist()))
    if len(classes) < 2:
        raise ValidationError("classifier training needs at least two distinct levels")
    index = {lv: i for i, lv in enumerate(classes)}
    x = corpus.vector_matrix(docs)
    y = np.zeros((len(docs), len(classes)))
    for row, lv in enumerate(levels):
        y[row, index[lv]] = 1.0
    rng = np.random.default_rng(cfg.seed)
    params = init_mlp(x.shape[1], cfg.hidden, len(classes), rng, class_levels=tuple(classes))
    history = _sgd_epochs(params, x, y, cfg, rng, "softmax-ce", "classifier")
    return params, history


# ---------------------------------------------------------------------------
# rank-SVM on difference features


def hinge_loss(params: LinearParams, xdiff: np.ndarray, y: np.ndarray, l2: float = 0.0) -> float:
    """Mean hinge loss of the difference-feature SVM, plus l2 * ||w||^2."""
    margins = 1.0 - y * (xdiff @ params.w + params.b)
    data = float(np.mean(np.maximum(margins, 0.0)))
    return data + (l2 * float(params.w @ params.w) if l2 > 0 else 0.0)


def hinge_gradient(params: LinearParams, xdiff: np.ndarray, y: np.ndarray, l2: float = 0.0) -> LinearParams:
    """Subgradient of the mean hinge loss (zero on inactive examples)."""
    margins = 1.0 - y * (xdiff @ params.w + params.b)
    active = margins > 0.0
    n = xdiff.shape[0]
    gw = -(y[active, None] * xdiff[active]).sum(axis=0) / n
    gb = -float(y[active].sum()) / n
    if l2 > 0:
        gw = gw + 2.0 * l2 * params.w
    return LinearParams(w=gw, b=gb)


def train_ranksvm(pairset: PairSet, corpus: Corpus, cfg: TrainConfig) -> tuple[LinearParams, list[float]]:
    """Train the linear pairwise ranker on x_i - x_j with labels +-1.

    The paper-style {1, 0} labels ([1,0] when the left level wins) map to
    {+1, -1}. The decision value w.(x_i - x_j) + b is the pair score.
    """
    if not pairset.pairs:
        raise ValidationError("pair set is empty")
    xi, xj, onehot = pair_arrays(pairset, corpus)
    xdiff = xi - xj
    y = np.where(onehot[:, 0] == 1.0, 1.0, -1.0)
    params = LinearParams(w=np.zeros(xdiff.shape[1]), b=0.0)
    rng = np.random.default_rng(cfg.seed)
    n = xdiff.shape[0]
    history: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            g = hinge_gradient(params, xdiff[idx], y[idx], cfg.l2)
            params.w -= cfg.learning_rate * g.w
            params.b -= cfg.learning_rate * g.b
        loss = hinge_loss(params, xdiff, y, 0.0)
        if not math.isfinite(loss) or not np.all(np.isfinite(params.w)):
            raise TrainingDivergedError(
                f"rank-SVM training diverged at epoch {epoch + 1}; try a lower learning rate"
            )
        history.append(float(loss))
    return params, history


def ranksvm_pair_scores(params: LinearParams, xi: np.ndarray, xj: np.ndarray) -> np.ndarray:
    """Decision values w.(x_i - x_j) + b for row-aligned vector matrices."""
    return (xi - xj) @ params.w + params.b


# ---------------------------------------------------------------------------
# ordinary least squares


def train_ols(corpus: Corpus, docs: Sequence[str]) -> LinearParams:
    """Least-squares fit of level on document vector via the normal equations.

    Falls back to a tiny ridge (lambda = 1e-8) when the Gram matrix is
    singular or the solve is numerically unusable.
    """
    if not docs:
        raise ValidationError("training document set is empty")
    x = corpus.vector_matrix(docs)
    y = corpus.levels(docs)
    a = np.hstack([x, np.ones((x.shape[0], 1))])
    gram = a.T @ a
    rhs = a.T @ y
    beta = None
    try:
        candidate = np.linalg.solve(gram, rhs)
        scale = float(np.max(np.abs(rhs))) + 1.0
        if np.all(np.isfinite(candidate)) and np.max(np.abs(gram @ candidate - rhs)) <= 1e-6 * scale:
            beta = candidate
    except np.linalg.LinAlgError:
        beta = None
    if beta is None:
        ridge = gram + 1e-8 * np.eye(gram.shape[0])
        beta = np.linalg.solve(ridge, rhs)
    return LinearParams(w=beta[:-1], b=float(beta[-1]))


def predict_linear(params: LinearParams, x: np.ndarray) -> np.ndarray:
    return x @ params.w + params.b


# ---------------------------------------------------------------------------
# prediction helpers for the MLP families


def mlp_outputs(params: MlpParams, x: np.ndarray) -> np.ndarray:
    _, _, z2 = _forward(params, x)
    return z2


def predict_regressor(params: MlpParams, x: np.ndarray) -> np.ndarray:
    return mlp_outputs(params, x)[:, 0]


def classifier_probabilities(params: MlpParams, x: np.ndarray) -> np.ndarray:
    return _softmax_rows(mlp_outputs(params, x))


def predict_classifier_levels(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Argmax class mapped back to its level value (ties possible downstream)."""
    if params.class_levels is None:
        raise ValidationError("params carry no class-to-level mapping")
    levels = np.asarray(params.class_levels)
    probs = classifier_probabilities(params, x)
    return levels[np.argmax(probs, axis=1)]


def classifier_expected_levels(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Probability-weighted expected level, a continuous alternative score."""
    if params.class_levels is None:
        raise ValidationError("params carry no class-to-level mapping")
    levels = np.asarray(params.class_levels)
    return classifier_probabilities(params, x) @ levels


# ---------------------------------------------------------------------------
# model persistence


@dataclass
class ModelBundle:
    """A trained model plus everything needed to reuse it reproducibly."""

    family: str
    params: MlpParams | LinearParams
    dim: int
    seed: int
    config: dict = field(default_factory=dict)
    loss_history: list[float] = field(default_factory=list)


def save_model(bundle: ModelBundle, path: str | Path) -> None:
    """Write a model as JSON; float values round-trip bit-exactly."""
    if bundle.family not in MODEL_FAMILIES:
        raise ValidationError(f"unknown model family '{bundle.family}'")
    p = bundle.params
    if isinstance(p, MlpParams):
        params_doc = {
            "kind": "mlp",
            "w1": p.w1.tolist(),
            "b1": p.b1.tolist(),
            "w2": p.w2.tolist(),
            "b2": p.b2.tolist(),
            "combiner": p.combiner,
            "class_levels": list(p.class_levels) if p.class_levels is not None else None,
        }
    else:
        params_doc = {"kind": "linear", "w": p.w.tolist(), "b": float(p.b)}
    doc = {
        "format": "readrank-model",
        "version": 1,
        "family": bundle.family,
        "dim": int(bundle.dim),
        "seed": int(bundle.seed),
        "config": bundle.config,
        "loss_history": [float(v) for v in bundle.loss_history],
        "params": params_doc,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> ModelBundle:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path.name}: invalid model JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != "readrank-model":
        raise ValidationError(f"{path.name}: not a readrank model file")
    family = doc.get("family")
    if family not in MODEL_FAMILIES:
        raise ValidationError(f"{path.name}: unknown model family '{family}'")
    pdoc = doc.get("params") or {}
    kind = pdoc.get("kind")
    params: MlpParams | LinearParams
    if kind == "mlp":
        levels = pdoc.get("class_levels")
        params = MlpParams(
            w1=np.asarray(pdoc["w1"], dtype=float),
            b1=np.asarray(pdoc["b1"], dtype=float),
            w2=np.asarray(pdoc["w2"], dtype=float),
            b2=np.asarray(pdoc["b2"], dtype=float),
            combiner=pdoc.get("combiner"),
            class_levels=tuple(levels) if levels is not None else None,
        )
        if not params.all_finite():
            raise ValidationError(f"{path.name}: non-finite model weights")
    elif kind == "linear":
        params = LinearParams(w=np.asarray(pdoc["w"], dtype=float), b=float(pdoc["b"]))
        if not (np.all(np.isfinite(params.w)) and math.isfinite(params.b)):
            raise ValidationError(f"{path.name}: non-finite model weights")
    else:
        raise ValidationError(f"{path.name}: unknown params kind '{kind}'")
    return ModelBundle(
        family=family,
        params=params,
        dim=int(doc.get("dim", 0)),
        seed=int(doc.get("seed", 0)),
        config=doc.get("config", {}),
        loss_history=[float(v) for v in doc.get("loss_history", [])],
    )
