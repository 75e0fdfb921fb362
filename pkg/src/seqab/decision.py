"""Stopping thresholds, expected losses and per-arm decision records."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class State(str, enum.Enum):
    CONTINUE = "Continue"
    REJECT_NULL = "RejectNull"
    ACCEPT_NULL_AT_CAP = "AcceptNullAtCap"


class Direction(str, enum.Enum):
    SUPERIOR = "Superior"
    INFERIOR = "Inferior"
    NONE = "None"


@dataclass(frozen=True)
class LossParams:
    """Losses for a Type I error (``k0``) and a Type II error (``k1``).

    Enrollment cost ``k2`` and null offset ``theta0`` are fixed at zero; with
    no enrollment cost the only early exit is rejection.
    """

    k0: float
    k1: float
    k2: float = 0.0
    theta0: float = 0.0

    def __post_init__(self):
        if not (self.k0 > 0 and self.k1 > 0):
            raise ValueError("k0 and k1 must be positive")
        if self.k2 != 0 or self.theta0 != 0:
            raise ValueError("only k2 = 0 and theta0 = 0 are supported")

    @classmethod
    def for_alpha(cls, alpha: float, k1: float = 1.0) -> "LossParams":
        return cls(k0=k1 * loss_ratio_one_sided(alpha), k1=k1)


@dataclass(frozen=True)
class ArmDecision:
    state: State
    direction: Direction = Direction.NONE
    look: int = 1
    n_at_decision: int = 0

    def __post_init__(self):
        if (self.direction is not Direction.NONE) != (self.state is State.REJECT_NULL):
            raise ValueError("direction must be set exactly when the null is rejected")
        if self.look < 1:
            raise ValueError("look index starts at 1")

    @property
    def rejected(self) -> bool:
        return self.state is State.REJECT_NULL


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def threshold_two_sided(alpha: float) -> float:
    """Bayes-factor cutoff ``(1 - alpha/2) / (alpha/2)``; 39 at alpha = 0.05."""
    _check_alpha(alpha)
    half = alpha / 2.0
    return (1.0 - half) / half


def loss_ratio_one_sided(alpha: float) -> float:
    _check_alpha(alpha)
    return (1.0 - alpha) / alpha


def expected_losses(p_alt: float, losses: LossParams) -> tuple[float, float]:
    """Posterior expected loss of (accepting, rejecting) the null."""
    if not 0.0 <= p_alt <= 1.0:
        raise ValueError("p_alt must be a probability")
    return losses.k1 * p_alt, losses.k0 * (1.0 - p_alt)


def reject_test(bf: float, c: float) -> bool:
    return bf >= c


def wald_sprt_bounds(alpha: float, beta: float) -> tuple[float, float]:
    """Wald's SPRT (upper, lower) likelihood-ratio boundaries."""
    _check_alpha(alpha)
    _check_alpha(beta)
    return (1.0 - beta) / alpha, beta / (1.0 - alpha)


def direction_of(pooled_contrast: float, raw_contrast: float = 0.0) -> Direction:
    """Sign of the contrast at the deciding look.

    Falls back to the unpooled contrast when complete pooling makes the pooled
    one exactly zero; a remaining exact tie resolves to ``SUPERIOR``.
    """
    c = pooled_contrast if pooled_contrast != 0 else raw_contrast
    return Direction.INFERIOR if c < 0 else Direction.SUPERIOR
