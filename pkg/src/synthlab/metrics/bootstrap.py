"""Percentile bootstrap confidence interval for the mean."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import MetricError


def bootstrap_ci(
    values: Sequence[float],
    resamples: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
) -> tuple[float, float]:
    """Seeded percentile CI of the mean over bootstrap resamples.

    Draws ``resamples`` resamples with replacement, takes the mean of each,
    and returns the (alpha/2, 1-alpha/2) percentiles. Deterministic in
    (values, resamples, alpha, seed).
    """
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        raise MetricError("bootstrap_ci requires a non-empty sample")
    if not 0.0 < alpha < 1.0:
        raise MetricError(f"alpha must be in (0, 1), got {alpha}")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, vals.size, size=(resamples, vals.size))
    means = vals[idx].mean(axis=1)
    lo, hi = np.percentile(means, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(lo), float(hi)
