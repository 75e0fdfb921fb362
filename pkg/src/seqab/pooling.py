"""Partial pooling of arm log-odds with an empirical-Bayes normal-normal model.

Each arm contributes a logit-scale estimate ``y_r`` with sampling variance
``v_r``. Arm effects are modelled as ``alpha_r ~ N(mu, sigma_alpha^2)``;
``(mu, sigma_alpha)`` maximise the marginal likelihood and the arm effects
are shrunk toward ``mu`` in proportion to their noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _accel
from .glm import ArmCounts, logit

TAU_MAX = 5.0
TAU_TOL = 1e-8


@dataclass(frozen=True)
class ArmSummary:
    arm_id: int
    y: float
    v: float

    def __post_init__(self):
        if not (self.v > 0 and math.isfinite(self.v) and math.isfinite(self.y)):
            raise ValueError(f"arm {self.arm_id}: need finite y and v > 0")


@dataclass(frozen=True)
class PoolingFit:
    arm_ids: tuple[int, ...]
    y: np.ndarray
    v: np.ndarray
    mu: float
    sigma_alpha: float
    mu_var: float
    shrunk_mean: np.ndarray
    shrunk_var: np.ndarray

    @property
    def weight(self) -> np.ndarray:
        """Fraction of each arm's own estimate kept after shrinkage."""
        t2 = self.sigma_alpha**2
        return t2 / (t2 + self.v)

    def index(self, arm_id: int) -> int:
        try:
            return self.arm_ids.index(arm_id)
        except ValueError:
            raise KeyError(f"unknown arm id {arm_id}") from None

    def shrunk_mean_given(self, mu: float) -> np.ndarray:
        w = self.weight
        return w * self.y + (1.0 - w) * mu


@dataclass(frozen=True)
class PosteriorDraws:
    draws: np.ndarray
    arm_ids: tuple[int, ...]
    seed: int | None = None


def arm_logit_summaries(counts: Sequence[ArmCounts]) -> list[ArmSummary]:
    """Logit point estimate and delta-method variance for each arm.

    Half a success and half a failure are added only to arms at a boundary
    count (s == 0 or s == n).
    """
    out = []
    for c in counts:
        if c.n < 1:
            raise ValueError(f"arm {c.arm_id} has no observations")
        if c.is_boundary:
            s, n = c.s + 0.5, c.n + 1.0
        else:
            s, n = float(c.s), float(c.n)
        p = s / n
        out.append(ArmSummary(c.arm_id, float(logit(p)), 1.0 / (n * p * (1.0 - p))))
    return out


def summaries_from_arrays(s: np.ndarray, n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`arm_logit_summaries` returning ``(y, v)`` arrays."""
    s = np.asarray(s, dtype=float)
    n = np.asarray(n, dtype=float)
    edge = (s <= 0) | (s >= n)
    s = np.where(edge, s + 0.5, s)
    n = np.where(edge, n + 1.0, n)
    p = s / n
    return np.log(p) - np.log1p(-p), 1.0 / (n * p * (1.0 - p))


def marginal_loglik(mu, sigma_alpha, y, v):
    """Log marginal likelihood of ``y`` with ``alpha`` integrated out.

    Broadcasts over ``mu`` and ``sigma_alpha``; ``y`` and ``v`` run along the
    last axis.
    """
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    mu = np.asarray(mu, dtype=float)[..., None]
    tot = v + np.asarray(sigma_alpha, dtype=float)[..., None] ** 2
    return -0.5 * np.sum(np.log(2.0 * np.pi * tot) + (y - mu) ** 2 / tot, axis=-1)


def fit_from_arrays(y: np.ndarray, v: np.ndarray, arm_ids: Sequence[int] | None = None) -> PoolingFit:
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    if y.shape[0] < 2:
        raise ValueError("hierarchical fit needs at least 2 arms")
    tau = _accel.fit_tau(y, v, TAU_MAX, TAU_TOL)
    w_tot = 1.0 / (v + tau * tau)
    mu = float(np.sum(w_tot * y) / np.sum(w_tot))
    mu_var = float(1.0 / np.sum(w_tot))
    t2 = tau * tau
    w = t2 / (t2 + v)
    ids = tuple(range(len(y))) if arm_ids is None else tuple(arm_ids)
    return PoolingFit(
        arm_ids=ids,
        y=y,
        v=v,
        mu=mu,
        sigma_alpha=float(tau),
        mu_var=mu_var,
        shrunk_mean=w * y + (1.0 - w) * mu,
        shrunk_var=t2 * v / (t2 + v),
    )


def fit_hierarchical(summaries: Sequence[ArmSummary]) -> PoolingFit:
    """Empirical-Bayes fit of the normal-normal model.

    ``sigma_alpha`` is found by golden-section search on ``[0, 5]`` (after a
    coarse scan to bracket the maximum) with ``mu`` profiled out as the
    precision-weighted mean. ``sigma_alpha == 0`` means complete pooling.
    """
    if len(summaries) < 2:
        raise ValueError("hierarchical fit needs at least 2 arms")
    return fit_from_arrays(
        np.array([a.y for a in summaries]),
        np.array([a.v for a in summaries]),
        [a.arm_id for a in summaries],
    )


def posterior_normals(rng: np.random.Generator, n_draws: int, n_arms: int) -> np.ndarray:
    return rng.standard_normal((n_draws, n_arms + 1))


def posterior_draws(fit: PoolingFit, n_draws: int, seed: int) -> PosteriorDraws:
    """Draw arm log-odds, propagating uncertainty in ``mu`` but not ``sigma_alpha``.

    Per draw: ``mu* ~ N(mu, mu_var)``, then each arm is drawn from its
    conditional posterior with the shrinkage target moved to ``mu*``.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    z = posterior_normals(np.random.default_rng(seed), n_draws, len(fit.arm_ids))
    draws = _accel.draws_from_normals(
        fit.y, fit.weight, np.sqrt(fit.shrunk_var), fit.mu, math.sqrt(fit.mu_var), z
    )
    return PosteriorDraws(draws=draws, arm_ids=fit.arm_ids, seed=seed)


def contrast_draws(draws: PosteriorDraws, control: int = 0) -> np.ndarray:
    """Per-draw ``alpha_r - alpha_control`` for every arm (control column is 0)."""
    if control not in draws.arm_ids:
        raise KeyError(f"unknown arm id {control}")
    j = draws.arm_ids.index(control)
    return draws.draws - draws.draws[:, j : j + 1]


def prob_best(draws: PosteriorDraws | np.ndarray) -> np.ndarray:
    """Share of draws in which each arm is the row maximum; ties split evenly."""
    mat = draws.draws if isinstance(draws, PosteriorDraws) else np.asarray(draws)
    if mat.ndim != 2 or mat.shape[0] < 1:
        raise ValueError("need a non-empty (n_draws, n_arms) matrix")
    return _accel.prob_best_from_draws_numpy(mat)


def prob_best_from_fit(fit: PoolingFit, n_draws: int, rng: np.random.Generator) -> np.ndarray:
    """Probability-of-best without materialising the draws matrix (engine path)."""
    z = posterior_normals(rng, n_draws, len(fit.arm_ids))
    return _accel.prob_best_kernel(
        fit.y, fit.weight, np.sqrt(fit.shrunk_var), fit.mu, math.sqrt(fit.mu_var), z
    )


def pooled_contrasts(fit: PoolingFit, control: int = 0) -> np.ndarray:
    return fit.shrunk_mean - fit.shrunk_mean[fit.index(control)]
