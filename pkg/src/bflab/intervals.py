"""Confidence intervals for Monte Carlo proportions and weighted means.

Plain indicator estimates get Wilson score intervals, zero-hit rows get an
exact one-sided Clopper-Pearson bound, and importance-sampling estimates
(weighted means) get the usual normal approximation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special


def _z_for(confidence: float) -> float:
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    return float(special.ndtri(0.5 * (1.0 + confidence)))


def wilson_interval(hits: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Behaves sensibly at the edges: hits = 0 gives a lower bound of exactly
    0, hits = trials an upper bound of exactly 1.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= hits <= trials:
        raise ValueError(f"hits {hits} outside [0, {trials}]")
    z = _z_for(confidence)
    n = float(trials)
    p = hits / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2.0 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n))
    low = max(0.0, centre - half)
    high = min(1.0, centre + half)
    return low, high


def clopper_pearson_upper(hits: int, trials: int, confidence: float = 0.95) -> float:
    """Exact one-sided upper confidence bound for a binomial proportion.

    The bound u solves P(X <= hits | u) = 1 - confidence, so u is the
    largest rate still compatible with seeing this few events.  hits = 0
    reduces to 1 - (1 - confidence)^(1/trials).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= hits <= trials:
        raise ValueError(f"hits {hits} outside [0, {trials}]")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    if hits == trials:
        return 1.0
    # Beta(hits + 1, trials - hits) quantile at the confidence level
    return float(special.betaincinv(hits + 1.0, float(trials - hits), confidence))


def weighted_mean_interval(
    values: np.ndarray, confidence: float = 0.95
) -> tuple[float, float, float]:
    """(mean, low, high) normal-approximation interval for a sample mean.

    Meant for nonnegative likelihood-ratio summands w * indicator, so the
    interval is clipped below at 0; a single observation gets a degenerate
    interval rather than a division by zero.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("values must be a nonempty 1-d array")
    mean = float(arr.mean())
    if arr.size == 1:
        return mean, mean, mean
    z = _z_for(confidence)
    sem = float(arr.std(ddof=1)) / math.sqrt(arr.size)
    return mean, max(0.0, mean - z * sem), mean + z * sem
