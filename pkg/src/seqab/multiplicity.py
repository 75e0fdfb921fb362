"""Multiple-comparison baselines and fixed-sample power."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import norm


@dataclass
class PValueSet:
    values: np.ndarray
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not self.labels:
            self.labels = list(range(len(self.values)))
        if len(self.labels) != len(self.values):
            raise ValueError("labels and values differ in length")
        if np.any((self.values < 0) | (self.values > 1)) or np.any(np.isnan(self.values)):
            raise ValueError("p-values must lie in [0, 1]")


def bonferroni_alpha(alpha: float, m: int) -> float:
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if m < 1:
        raise ValueError("need at least one test")
    return alpha / m


def invert_bf(bf: float) -> float:
    """Always-valid p-value ``min(1, 1/bf)``."""
    if bf < 0:
        raise ValueError("Bayes factor must be non-negative")
    if bf <= 1.0:
        return 1.0
    return 1.0 / bf


def benjamini_hochberg(pvals: PValueSet | Sequence[float], q: float) -> np.ndarray:
    """Step-up FDR procedure; returns a boolean rejection mask in input order.

    Rejects every hypothesis whose p-value is at most ``p_(k)``, where ``k`` is
    the largest rank with ``p_(k) <= q * k / m``.
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    p = pvals.values if isinstance(pvals, PValueSet) else np.asarray(pvals, dtype=float)
    m = p.shape[0]
    if m == 0:
        return np.zeros(0, dtype=bool)
    srt = np.sort(p)
    ok = np.nonzero(srt <= q * np.arange(1, m + 1) / m)[0]
    if ok.size == 0:
        return np.zeros(m, dtype=bool)
    return p <= srt[ok[-1]]


def fixed_sample_power(n_per_arm: float, p0: float, p1: float, alpha_star: float) -> float:
    """Two-sided two-proportion z-test power, unpooled-variance normal approximation."""
    if not 0 < alpha_star < 1:
        raise ValueError("alpha_star must lie in (0, 1)")
    if n_per_arm < 1:
        raise ValueError("n_per_arm must be >= 1")
    if not (0 < p0 < 1 and 0 < p1 < 1):
        raise ValueError("p0 and p1 must lie in (0, 1)")
    se = math.sqrt((p0 * (1 - p0) + p1 * (1 - p1)) / n_per_arm)
    return float(norm.cdf(abs(p1 - p0) / se - norm.ppf(1 - alpha_star / 2)))
