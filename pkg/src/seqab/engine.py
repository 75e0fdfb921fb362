"""Monte Carlo simulation of sequentially monitored multi-arm experiments."""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _accel
from .decision import ArmDecision, Direction, State, direction_of, reject_test, threshold_two_sided
from .glm import BF_LOG_MAX
from .multiplicity import benjamini_hochberg, fixed_sample_power, invert_bf
from .pooling import fit_from_arrays, prob_best_from_fit, summaries_from_arrays


class Method(str, enum.Enum):
    PROPOSED = "Proposed"
    JPW = "JPW"


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    p0: float
    p_r: tuple[float, ...]
    batch: int = 500
    cap: int = 20_000
    alpha: float = 0.05
    n_draws: int = 4000
    method: Method = Method.PROPOSED
    n_trials: int = 1000
    seed: int = 0
    adaptive_h: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "p_r", tuple(float(p) for p in self.p_r))
        object.__setattr__(self, "method", Method(self.method))
        if not 0 < self.p0 < 1:
            raise ConfigError("p0", "must lie in (0, 1)")
        if not self.p_r:
            raise ConfigError("p_r", "need at least one treatment arm")
        if any(not 0 < p < 1 for p in self.p_r):
            raise ConfigError("p_r", "every rate must lie in (0, 1)")
        if self.batch < 1:
            raise ConfigError("batch", "must be >= 1")
        if self.cap < self.batch or self.cap % self.batch:
            raise ConfigError("cap", "must be a positive multiple of batch")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha", "must lie in (0, 1)")
        if self.n_draws < 1:
            raise ConfigError("n_draws", "must be >= 1")
        if self.n_trials < 1:
            raise ConfigError("n_trials", "must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed", "must be non-negative")
        if self.adaptive_h is not None and not 0 <= self.adaptive_h <= 1:
            raise ConfigError("adaptive_h", "must lie in [0, 1]")

    @property
    def n_arms(self) -> int:
        """Number of treatment arms (control excluded)."""
        return len(self.p_r)

    @property
    def n_looks(self) -> int:
        return self.cap // self.batch

    @property
    def null_mask(self) -> np.ndarray:
        return np.array([p == self.p0 for p in self.p_r])


@dataclass
class TrialResult:
    """One simulated experiment.

    Path arrays have one row per look actually run. Column 0 of ``n_path`` and
    ``prob_best_path`` is the control; ``bf_path`` and ``state_path`` cover
    treatment arms only, with NaN / -1 where an arm was not tested.
    """

    trial_index: int
    decisions: list[ArmDecision]
    final_n: np.ndarray
    n_path: np.ndarray
    bf_path: np.ndarray
    prob_best_path: np.ndarray
    state_path: np.ndarray

    @property
    def rejected(self) -> np.ndarray:
        return np.array([d.rejected for d in self.decisions])

    @property
    def n_looks_run(self) -> int:
        return self.n_path.shape[0]


# state codes used in state_path
STATE_CODES = {State.CONTINUE: 0, State.REJECT_NULL: 1, State.ACCEPT_NULL_AT_CAP: 2}
STATE_FROM_CODE = {v: k for k, v in STATE_CODES.items()}


def generate_batch(p: float, batch: int, rng: np.random.Generator) -> int:
    """Successes among ``batch`` Bernoulli(p) subjects; advances ``rng``."""
    if batch < 0:
        raise ValueError("batch must be >= 0")
    return int(rng.binomial(batch, p))


def adaptive_allocation(prob_best: Sequence[float], h: float) -> np.ndarray:
    """Outcome-adaptive weights ``pb_r**h / sum(pb**h)``, with ``0**0 == 1``."""
    pb = np.asarray(prob_best, dtype=float)
    if not 0 <= h <= 1:
        raise ValueError("h must lie in [0, 1]")
    if np.any(pb < 0):
        raise ValueError("prob_best must be non-negative")
    powered = np.ones_like(pb) if h == 0 else pb**h
    total = powered.sum()
    if total <= 0:
        raise ValueError("prob_best is all zero")
    return powered / total


def split_batch(total: int, weights: np.ndarray) -> np.ndarray:
    """Integer allocation of ``total`` proportional to ``weights`` (largest remainder)."""
    raw = total * np.asarray(weights, dtype=float)
    out = np.floor(raw).astype(np.int64)
    short = total - int(out.sum())
    if short > 0:
        order = np.argsort(-(raw - out), kind="stable")
        out[order[:short]] += 1
    return out


def trial_seed_sequence(seed: int, trial_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, trial_index])


def run_trial(config: ExperimentConfig, trial_index: int) -> TrialResult:
    """Simulate one experiment under ``config``.

    Every arm draws outcomes from its own stream derived from
    ``(config.seed, trial_index)``, so the two methods see the same data for
    as long as an arm is enrolling.
    """
    m = config.n_arms
    p = np.array((config.p0,) + config.p_r)
    streams = trial_seed_sequence(config.seed, trial_index).spawn(m + 2)
    arm_rng = [np.random.default_rng(s) for s in streams[: m + 1]]
    draw_rng = np.random.default_rng(streams[m + 1])

    c = threshold_two_sided(config.alpha)
    s = np.zeros(m + 1)
    n = np.zeros(m + 1)
    active = np.ones(m, dtype=bool)
    decisions: list[ArmDecision | None] = [None] * m
    n_rows, bf_rows, pb_rows, st_rows = [], [], [], []
    last_pb = np.full(m + 1, 1.0 / (m + 1))

    for look in range(1, config.n_looks + 1):
        enrolling = np.concatenate([[True], active])
        if config.adaptive_h is None or look == 1:
            alloc = np.where(enrolling, config.batch, 0)
        else:
            idx = np.nonzero(enrolling)[0]
            w = adaptive_allocation(last_pb[idx], config.adaptive_h)
            alloc = np.zeros(m + 1, dtype=np.int64)
            alloc[idx] = split_batch(config.batch * idx.size, w)
        alloc = np.minimum(alloc, config.cap - n)
        for r in np.nonzero(alloc > 0)[0]:
            s[r] += generate_batch(p[r], int(alloc[r]), arm_rng[r])
            n[r] += alloc[r]

        idx = np.nonzero(active)[0]
        log_bf = np.full(m, np.nan)
        log_bf[idx] = _accel.pairwise_log_bf(s[0], n[0], s[1:][idx], n[1:][idx])
        bf = np.exp(np.minimum(log_bf, BF_LOG_MAX))
        testable = active & ~np.isnan(log_bf)

        reject = np.zeros(m, dtype=bool)
        if config.method is Method.PROPOSED:
            for r in np.nonzero(testable)[0]:
                reject[r] = reject_test(bf[r], c)
        else:
            # untestable active arms take part in the BH family with p = 1
            pstar = np.array([invert_bf(b) if t else 1.0 for b, t in zip(bf, testable)])
            reject[idx] = benjamini_hochberg(pstar[idx], config.alpha)

        y, v = summaries_from_arrays(s, n)
        fit = fit_from_arrays(y, v)
        pb = prob_best_from_fit(fit, config.n_draws, draw_rng)
        pooled = fit.shrunk_mean[1:] - fit.shrunk_mean[0]
        raw = y[1:] - y[0]

        states = np.full(m, -1, dtype=np.int8)
        states[active] = STATE_CODES[State.CONTINUE]
        for r in np.nonzero(reject)[0]:
            decisions[r] = ArmDecision(
                State.REJECT_NULL, direction_of(pooled[r], raw[r]), look, int(n[r + 1])
            )
            states[r] = STATE_CODES[State.REJECT_NULL]
        active &= ~reject
        if look == config.n_looks:
            for r in np.nonzero(active)[0]:
                decisions[r] = ArmDecision(State.ACCEPT_NULL_AT_CAP, Direction.NONE, look, int(n[r + 1]))
                states[r] = STATE_CODES[State.ACCEPT_NULL_AT_CAP]
            active[:] = False

        n_rows.append(n.copy())
        bf_rows.append(np.where(np.isnan(log_bf), np.nan, bf))
        pb_rows.append(pb)
        st_rows.append(states)
        last_pb = pb
        if not active.any():
            break

    return TrialResult(
        trial_index=trial_index,
        decisions=decisions,  # type: ignore[arg-type]
        final_n=n.copy(),
        n_path=np.array(n_rows),
        bf_path=np.array(bf_rows),
        prob_best_path=np.array(pb_rows),
        state_path=np.array(st_rows),
    )


def _run_one(args):
    config, i = args
    return run_trial(config, i)


def default_workers() -> int:
    return os.cpu_count() or 1


def run_trials(config: ExperimentConfig, workers: int | None = None) -> list[TrialResult]:
    """Run ``config.n_trials`` trials, in trial order, on up to ``workers`` processes."""
    workers = default_workers() if workers is None else max(1, int(workers))
    jobs = [(config, i) for i in range(config.n_trials)]
    if workers == 1 or config.n_trials == 1:
        return [_run_one(j) for j in jobs]
    chunk = max(1, config.n_trials // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=chunk))


@dataclass
class AggregateMetrics:
    """Cross-trial operating characteristics.

    ``rate`` is power for arms with ``p_r != p0`` and the Type I error
    estimate for arms with ``p_r == p0``. Fields that do not apply to an arm
    (fixed-sample power for a null arm) hold NaN.
    """

    p0: float
    p_r: tuple[float, ...]
    rate: np.ndarray
    n_bar: np.ndarray
    fixed_power: np.ndarray
    fixed_power_bonferroni: np.ndarray
    fwer: float
    fdr: float
    per_test_alpha: float
    overall_error_rate: float
    n_trials: int = 0
    overall_error_rate_se: float = float("nan")
    avg_n_nonnull: float = float("nan")
    avg_n_nonnull_se: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def null_mask(self) -> np.ndarray:
        return np.array([p == self.p0 for p in self.p_r])


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    if x.size == 0:
        return float("nan"), float("nan")
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(np.mean(x)), se


def aggregate(results: Sequence[TrialResult], config: ExperimentConfig) -> AggregateMetrics:
    if not results:
        raise ValueError("need at least one trial")
    rejected = np.array([r.rejected for r in results])
    final_n = np.array([r.final_n[1:] for r in results])
    null = config.null_mask
    m = config.n_arms
    T = len(results)

    false_pos = rejected[:, null]
    missed = ~rejected[:, ~null]
    total_rej = int(rejected.sum())
    fwer = float(false_pos.any(axis=1).mean()) if null.any() else 0.0
    fdr = float(false_pos.sum() / total_rej) if total_rej else 0.0
    rate = rejected.mean(axis=0)
    per_test = float(rate[null].mean()) if null.any() else float("nan")
    errors = false_pos.sum(axis=1) + missed.sum(axis=1)
    err_mean, err_se = _mean_se(errors / m)

    fixed = np.full(m, np.nan)
    fixed_bonf = np.full(m, np.nan)
    a_bonf = config.alpha / m
    for r in np.nonzero(~null)[0]:
        pr = config.p_r[r]
        fixed[r] = np.mean([fixed_sample_power(nn, config.p0, pr, config.alpha) for nn in final_n[:, r]])
        fixed_bonf[r] = np.mean([fixed_sample_power(nn, config.p0, pr, a_bonf) for nn in final_n[:, r]])

    if (~null).any():
        avg_nn, avg_nn_se = _mean_se(final_n[:, ~null].mean(axis=1))
    else:
        avg_nn, avg_nn_se = float("nan"), float("nan")
    return AggregateMetrics(
        p0=config.p0,
        p_r=config.p_r,
        rate=rate,
        n_bar=final_n.mean(axis=0),
        fixed_power=fixed,
        fixed_power_bonferroni=fixed_bonf,
        fwer=fwer,
        fdr=fdr,
        per_test_alpha=per_test,
        overall_error_rate=err_mean,
        n_trials=T,
        overall_error_rate_se=err_se,
        avg_n_nonnull=avg_nn,
        avg_n_nonnull_se=avg_nn_se,
    )


def mean_prob_best_by_look(results: Sequence[TrialResult], n_looks: int) -> np.ndarray:
    """Average prob-best per look, carrying each trial's last value forward
    once it has stopped."""
    out = np.zeros((n_looks, results[0].prob_best_path.shape[1]))
    for res in results:
        path = res.prob_best_path
        k = path.shape[0]
        out[:k] += path
        if k < n_looks:
            out[k:] += path[-1]
    return out / len(results)
