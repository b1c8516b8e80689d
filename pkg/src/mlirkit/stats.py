"""Two-sample Kolmogorov-Smirnov test, paired t-test, and Bonferroni
adjustment used by the evaluation and bias reports."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import stats as sps

_KS_TERM_CUTOFF = 1e-10


def ks_two_sample(sample_a: Sequence[float], sample_b: Sequence[float]) -> tuple[float, float]:
    """Two-sample KS statistic and asymptotic two-sided p-value.

    D is the supremum distance between the two empirical CDFs. The
    p-value comes from the Kolmogorov distribution evaluated at
    lambda = (sqrt(n_e) + 0.12 + 0.11/sqrt(n_e)) * D with effective size
    n_e = n_a*n_b/(n_a+n_b): p = 2 * sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2),
    truncated when terms drop below 1e-10 and clamped to [0, 1].
    """
    a = np.sort(np.asarray(sample_a, dtype=np.float64))
    b = np.sort(np.asarray(sample_b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("KS test needs at least one observation per sample")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.size
    cdf_b = np.searchsorted(b, pooled, side="right") / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    return d, _kolmogorov_sf_corrected(d, a.size, b.size)


def _kolmogorov_sf_corrected(d: float, n_a: int, n_b: int) -> float:
    if d == 0.0:
        return 1.0
    n_e = n_a * n_b / (n_a + n_b)
    root = math.sqrt(n_e)
    lam = (root + 0.12 + 0.11 / root) * d
    # below 0.2 the series sums to 1 beyond double precision
    if lam < 0.2:
        return 1.0
    total = 0.0
    sign = 1.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        if term < _KS_TERM_CUTOFF:
            break
        total += sign * term
        sign = -sign
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def paired_t_test(scores_a: Sequence[float], scores_b: Sequence[float]) -> tuple[float, float]:
    """Two-sided paired t-test over per-query score differences.

    Uses the n-1 denominator for the standard deviation. When every
    difference is identical (sd = 0): p = 1 if the mean difference is 0,
    else p = 0 with an infinite t.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"paired samples must be 1-D and equal length, got {a.shape} vs {b.shape}")
    n = a.size
    if n < 2:
        raise ValueError(f"paired t-test needs n >= 2, got {n}")
    diff = a - b
    mean = float(diff.mean())
    sd = float(diff.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * float(sps.t.sf(abs(t), df=n - 1))
    return t, min(1.0, p)


def bonferroni_adjust(p_values: Sequence[float], n_tests: int) -> list[float]:
    """Multiply each p-value by the number of tests, clamped to 1."""
    if n_tests < 1:
        raise ValueError(f"n_tests must be >= 1, got {n_tests}")
    adjusted = []
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value outside [0, 1]: {p}")
        adjusted.append(min(1.0, n_tests * p))
    return adjusted
