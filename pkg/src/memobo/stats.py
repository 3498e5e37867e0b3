"""Nonparametric tests and summaries used by the bounds-reduction step.

Three tools: an entropy-based uniformity test on [0,1] (Vasicek spacing
entropy with a seeded Monte-Carlo null), a one-sample Wilcoxon signed-rank
test with exact small-sample p-values, and type-7 percentiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .seeding import make_rng

SPACING_FLOOR = 1e-12


class InsufficientDataError(ValueError):
    """Too few samples for the requested test."""


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n: int
    method: str
    degenerate: bool = False

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")


def vasicek_entropy(samples: np.ndarray, window: int) -> float:
    """Spacing-based entropy estimate of samples in [0,1].

    Mean of log(n * (X_(i+w) - X_(i-w)) / (2w)) over the sorted sample,
    order-statistic indices clamped to the ends. Zero spacings (heavy
    duplicates) are floored at SPACING_FLOOR before the log.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 3:
        raise InsufficientDataError("vasicek entropy needs n >= 3")
    if not (1 <= window <= n // 2):
        raise ValueError(f"window must be in [1, n/2], got {window} for n={n}")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("samples must lie in [0, 1]")
    return float(_entropy_sorted(x[None, :], window)[0])


def _entropy_sorted(rows: np.ndarray, window: int) -> np.ndarray:
    """Vasicek entropy for each row of an already-sorted (k, n) matrix."""
    k, n = rows.shape
    idx = np.arange(n)
    hi = np.minimum(idx + window, n - 1)
    lo = np.maximum(idx - window, 0)
    spacings = rows[:, hi] - rows[:, lo]
    spacings = np.maximum(spacings, SPACING_FLOOR)
    return np.mean(np.log(spacings * (n / (2.0 * window))), axis=1)


_NULL_CACHE: dict[tuple[int, int, int, int], np.ndarray] = {}


def _null_entropies(n: int, window: int, replicates: int, seed: int) -> np.ndarray:
    """Sorted Monte-Carlo null distribution of the entropy statistic."""
    key = (n, window, replicates, seed)
    cached = _NULL_CACHE.get(key)
    if cached is not None:
        return cached
    rng = make_rng(seed)
    null = np.empty(replicates)
    # chunked so memory stays bounded for large replicate counts
    chunk = max(1, min(replicates, 200_000 // max(n, 1)))
    start = 0
    while start < replicates:
        stop = min(start + chunk, replicates)
        u = np.sort(rng.random((stop - start, n)), axis=1)
        null[start:stop] = _entropy_sorted(u, window)
        start = stop
    null.sort()
    if len(_NULL_CACHE) > 64:
        _NULL_CACHE.clear()
    _NULL_CACHE[key] = null
    return null


def dudewicz_vdm_test(
    samples: np.ndarray, seed: int, replicates: int = 10_000
) -> TestResult:
    """Entropy-based uniformity test on [0,1]; small p rejects uniformity.

    The statistic is the Vasicek entropy with window floor(sqrt(n)); the
    p-value is the left-tail Monte-Carlo probability P(H_null <= H_obs)
    under `replicates` seeded uniform-null draws of the same size, computed
    as (1 + #{H_null <= H_obs}) / (1 + replicates).
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 5:
        raise InsufficientDataError(f"uniformity test needs n >= 5, got {n}")
    window = int(math.floor(math.sqrt(n)))
    window = min(window, n // 2)
    h_obs = vasicek_entropy(x, window)
    null = _null_entropies(n, window, replicates, seed)
    count = int(np.searchsorted(null, h_obs, side="right"))
    p = (1.0 + count) / (1.0 + replicates)
    return TestResult(
        statistic=h_obs, p_value=min(p, 1.0), n=n, method="dudewicz-vdm-mc"
    )


def _midranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their midrank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=float)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_signed_rank_p(doubled_ranks: np.ndarray, w2: int) -> float:
    """Two-sided exact p for W+ by counting sign assignments.

    Works on doubled ranks (integers even with midrank ties) and tabulates
    the full distribution of 2*W+ over all 2^n equiprobable sign patterns
    by iterative convolution, which counts exactly what direct enumeration
    would.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        r = int(r)
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    denom = int(counts.sum())  # == 2^n
    p_le = int(counts[: w2 + 1].sum()) / denom
    p_ge = int(counts[w2:].sum()) / denom
    return min(1.0, 2.0 * min(p_le, p_ge))


def wilcoxon_signed_rank(
    samples: np.ndarray, mu0: float, exact_limit: int = 20
) -> TestResult:
    """One-sample two-sided Wilcoxon signed-rank test against median mu0.

    Zero deviations are dropped, tied absolute deviations get midranks, and
    the statistic is W+, the rank sum of positive deviations. For at most
    `exact_limit` nonzero deviations the p-value is exact over all sign
    assignments of the observed midranks; beyond that a normal
    approximation with tie and continuity corrections is used.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 1:
        raise InsufficientDataError("wilcoxon test needs n >= 1")
    d = x - mu0
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        return TestResult(
            statistic=0.0, p_value=1.0, n=0, method="wilcoxon-degenerate",
            degenerate=True,
        )
    ranks = _midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= exact_limit:
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        w2 = int(round(2.0 * w_plus))
        p = _exact_signed_rank_p(doubled, w2)
        return TestResult(statistic=w_plus, p_value=p, n=n, method="wilcoxon-exact")
    mean = n * (n + 1) / 4.0
    tie_term = 0.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    tie_term = float(np.sum(tie_counts.astype(float) ** 3 - tie_counts))
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0
    if var <= 0:
        return TestResult(
            statistic=w_plus, p_value=1.0, n=n, method="wilcoxon-normal",
            degenerate=True,
        )
    diff = w_plus - mean
    cc = 0.5 * np.sign(diff)
    z = (diff - cc) / math.sqrt(var) if diff != 0.0 else 0.0
    p = 2.0 * float(ndtr(-abs(z)))
    return TestResult(
        statistic=w_plus, p_value=min(p, 1.0), n=n, method="wilcoxon-normal"
    )


def percentile(samples: np.ndarray, q: float) -> float:
    """Type-7 percentile: linear interpolation at rank 1 + (n-1)q."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 1:
        raise InsufficientDataError("percentile needs n >= 1")
    if not (0.0 <= q <= 1.0):
        raise ValueError(f"q must be in [0, 1], got {q}")
    h = (n - 1) * q
    lo = int(math.floor(h))
    hi = min(lo + 1, n - 1)
    frac = h - lo
    return float(x[lo] * (1.0 - frac) + x[hi] * frac)
