"""Wilcoxon signed-rank comparison of two models' per-slug metric values.

Zero differences are dropped (Wilcoxon's original rule), absolute
differences are ranked with average ranks for ties, and the statistic is
W = min(W+, W-). For n <= 25 effective pairs the two-sided p-value is
exact over all 2^n sign assignments; beyond that a normal approximation
with tie-corrected variance and a 0.5 continuity correction is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MetricUndefinedError, ValidationError
from .metrics import MetricReport, average_ranks

EXACT_LIMIT = 25
RANK_METRICS = ("ndcg", "src", "ktcc", "ra")


@dataclass
class PairedSample:
    """Two metric vectors aligned pairwise (one value per slug, same order)."""

    a: Sequence[float]
    b: Sequence[float]

    def __post_init__(self) -> None:
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != b.shape or a.ndim != 1 or a.size < 1:
            raise ValidationError(f"paired sample shapes invalid: {a.shape} vs {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValidationError("paired sample contains non-finite values")
        self.a = a
        self.b = b


@dataclass
class TestResult:
    """Signed-rank test outcome; ``method`` is 'exact' or 'normal-approximation'."""

    statistic: float
    n_effective: int
    n_zero: int
    p_two_sided: float
    method: str
    n_dropped_undefined: int = 0


def _exact_p(doubled_ranks: Sequence[int], doubled_w: int) -> float:
    """P-value from the exact null distribution of W+ over all sign vectors.

    Computed by convolving the doubled (integer) ranks, which yields the
    same counts as enumerating all 2^n assignments.
    """
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled_ranks:
        for s in range(total - r, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
    at_most = sum(counts[: doubled_w + 1])
    n = len(doubled_ranks)
    return min(1.0, (2 * at_most) / (1 << n))


def _normal_p(w: float, ranks: np.ndarray) -> float:
    n = ranks.size
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= float(np.sum(tie_counts.astype(float) ** 3 - tie_counts)) / 48.0
    z = (w - mean + 0.5) / math.sqrt(var)
    phi = 0.5 * math.erfc(-z / math.sqrt(2.0))
    return min(1.0, 2.0 * phi)


def wilcoxon_signed_rank(sample: PairedSample) -> TestResult:
    """Two-sided Wilcoxon signed-rank test on paired differences."""
    d = np.asarray(sample.a, dtype=float) - np.asarray(sample.b, dtype=float)
    nonzero = d != 0.0
    n_zero = int(np.sum(~nonzero))
    d = d[nonzero]
    n = d.size
    if n == 0:
        raise MetricUndefinedError("all paired differences are zero; the test is undefined")
    ranks = average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if n <= EXACT_LIMIT:
        doubled = [int(round(2 * r)) for r in ranks]
        p = _exact_p(doubled, int(round(2 * w)))
        method = "exact"
    else:
        p = _normal_p(w, ranks)
        method = "normal-approximation"
    return TestResult(
        statistic=w,
        n_effective=n,
        n_zero=n_zero,
        p_two_sided=p,
        method=method,
    )


def compare_models(report_a: MetricReport, report_b: MetricReport, metric: str) -> TestResult:
    """Signed-rank test over one per-slug metric shared by two reports.

    Slugs where either report leaves the metric undefined are dropped
    pairwise; the dropped count is carried on the result.
    """
    if metric not in RANK_METRICS:
        raise ValidationError(f"unknown metric '{metric}' (choose from {RANK_METRICS})")
    shared = sorted(set(report_a.per_slug) & set(report_b.per_slug))
    if not shared:
        raise ValidationError("reports cover disjoint slug sets")
    a_vals: list[float] = []
    b_vals: list[float] = []
    dropped = 0
    for s in shared:
        va = report_a.per_slug[s].get(metric)
        vb = report_b.per_slug[s].get(metric)
        if va is None or vb is None:
            dropped += 1
            continue
        a_vals.append(float(va))
        b_vals.append(float(vb))
    if not a_vals:
        raise MetricUndefinedError(f"metric '{metric}' is undefined on every shared slug")
    result = wilcoxon_signed_rank(PairedSample(a_vals, b_vals))
    result.n_dropped_undefined = dropped
    return result
