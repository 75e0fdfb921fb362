"""Logistic regression on arm-indicator designs, BIC, and BIC Bayes factors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# exp() saturates here instead of overflowing to inf.
BF_LOG_MAX = 690.0
BF_MAX = math.exp(BF_LOG_MAX)

MAX_ITER = 50
REL_TOL = 1e-10


class BoundaryCountError(ValueError):
    """An arm has 0 successes or 0 failures, so the logit MLE is infinite."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ArmCounts:
    arm_id: int
    n: int
    s: int

    def __post_init__(self):
        if self.n < 0 or self.s < 0 or self.s > self.n:
            raise ValueError(f"arm {self.arm_id}: need 0 <= s <= n, got s={self.s}, n={self.n}")

    @property
    def is_boundary(self) -> bool:
        return self.s == 0 or self.s == self.n


@dataclass(frozen=True)
class LogisticFit:
    coefficients: np.ndarray
    covariance: np.ndarray
    log_lik: float
    k: int
    n: int
    bic: float
    iterations: int = 0


def logit(p):
    return np.log(p) - np.log1p(-p)


def binomial_loglik(s, n, p) -> float:
    """Bernoulli log-likelihood of ``s`` successes in ``n`` trials at rate ``p``."""
    s = np.asarray(s, dtype=float)
    n = np.asarray(n, dtype=float)
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(s > 0, s * np.log(p), 0.0)
        b = np.where(n - s > 0, (n - s) * np.log1p(-p), 0.0)
    return float(np.sum(a + b))


def _check_counts(counts: Sequence[ArmCounts]) -> list[ArmCounts]:
    counts = sorted(counts, key=lambda c: c.arm_id)
    ids = [c.arm_id for c in counts]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate arm ids: {ids}")
    if not ids or ids[0] != 0:
        raise ValueError("control arm 0 must be present")
    for c in counts:
        if c.n < 1:
            raise ValueError(f"arm {c.arm_id} has no observations")
    return counts


def fit_logistic(counts: Sequence[ArmCounts], arm_effects: bool = True) -> LogisticFit:
    """Fit ``logit(p) = intercept + sum_r effect_r * [arm == r]`` by Newton/IRLS.

    Rows are the aggregated binomial counts of each arm; the log-likelihood is
    the individual-level Bernoulli one (no binomial coefficient), and the BIC
    uses the total number of subjects. With ``arm_effects=False`` the model is
    intercept-only over the pooled data.

    Raises:
        BoundaryCountError: if the MLE is not finite (an arm, or the pooled
            data for the intercept-only model, has s == 0 or s == n).
        ConvergenceError: if Newton fails to converge in 50 iterations.
    """
    counts = _check_counts(counts)
    n = np.array([c.n for c in counts], dtype=float)
    s = np.array([c.s for c in counts], dtype=float)
    m = len(counts)
    if arm_effects:
        if any(c.is_boundary for c in counts):
            bad = [c.arm_id for c in counts if c.is_boundary]
            raise BoundaryCountError(f"boundary counts in arms {bad}")
        X = np.zeros((m, m))
        X[:, 0] = 1.0
        X[np.arange(1, m), np.arange(1, m)] = 1.0
    else:
        if s.sum() == 0 or s.sum() == n.sum():
            raise BoundaryCountError("pooled data has no successes or no failures")
        X = np.ones((m, 1))

    beta = np.zeros(X.shape[1])
    ll_old = None
    for it in range(1, MAX_ITER + 1):
        eta = X @ beta
        p = 1.0 / (1.0 + np.exp(-eta))
        w = n * p * (1.0 - p)
        grad = X.T @ (s - n * p)
        info = X.T @ (w[:, None] * X)
        beta = beta + np.linalg.solve(info, grad)
        p = 1.0 / (1.0 + np.exp(-(X @ beta)))
        ll = binomial_loglik(s, n, p)
        if ll_old is not None and abs(ll - ll_old) <= REL_TOL * abs(ll_old):
            break
        ll_old = ll
    else:
        raise ConvergenceError(f"IRLS did not converge in {MAX_ITER} iterations")

    # The log-lik criterion is quadratic in coefficient error; one more step.
    eta = X @ beta
    p = 1.0 / (1.0 + np.exp(-eta))
    info = X.T @ ((n * p * (1.0 - p))[:, None] * X)
    beta = beta + np.linalg.solve(info, X.T @ (s - n * p))
    p = 1.0 / (1.0 + np.exp(-(X @ beta)))
    info = X.T @ ((n * p * (1.0 - p))[:, None] * X)
    cov = np.linalg.inv(info)
    cov = 0.5 * (cov + cov.T)

    ll = binomial_loglik(s, n, p)
    k = X.shape[1]
    n_tot = int(n.sum())
    return LogisticFit(
        coefficients=beta,
        covariance=cov,
        log_lik=ll,
        k=k,
        n=n_tot,
        bic=bic(ll, k, n_tot),
        iterations=it,
    )


def closed_form_coefficients(counts: Sequence[ArmCounts]) -> np.ndarray:
    """Saturated-design MLE: intercept = logit(p_0), effect_r = logit(p_r) - logit(p_0)."""
    counts = _check_counts(counts)
    lo = np.array([logit(c.s / c.n) for c in counts])
    return np.concatenate([[lo[0]], lo[1:] - lo[0]])


def bic(log_lik: float, k: int, n: int) -> float:
    if n < 1 or k < 1:
        raise ValueError("bic needs n >= 1 and k >= 1")
    return -2.0 * log_lik + k * math.log(n)


def log_bayes_factor_bic(bic_null: float, bic_alt: float) -> float:
    return 0.5 * (bic_null - bic_alt)


def bayes_factor_bic(bic_null: float, bic_alt: float) -> float:
    """Evidence ratio alternative:null, ``exp((bic_null - bic_alt) / 2)``.

    Saturates at ``BF_MAX`` (``exp(690)``, about 1e299) rather than overflowing.
    """
    if not (math.isfinite(bic_null) and math.isfinite(bic_alt)):
        raise ValueError("BIC values must be finite")
    return math.exp(min(log_bayes_factor_bic(bic_null, bic_alt), BF_LOG_MAX))


def pairwise_bayes_factor(control: ArmCounts, arm: ArmCounts) -> float:
    """BIC Bayes factor for a difference between ``arm`` and ``control``.

    Alternative: intercept + arm indicator on the two arms' data.
    Null: intercept only on the same data. ``n`` is the two arms' total.
    """
    pair = [ArmCounts(0, control.n, control.s), ArmCounts(1, arm.n, arm.s)]
    alt = fit_logistic(pair, arm_effects=True)
    null = fit_logistic(pair, arm_effects=False)
    return bayes_factor_bic(null.bic, alt.bic)
