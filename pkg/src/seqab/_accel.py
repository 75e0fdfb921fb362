"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports and ``SEQAB_DISABLE_NUMBA`` is
unset (or ``0``). Both paths implement the same arithmetic, so they agree up
to floating-point reassociation (``tests/test_accel.py`` checks this); the
benchmark in ``benchmarks/`` times them side by side.
"""

from __future__ import annotations

import math
import os

import numpy as np

_LOG_2PI = math.log(2.0 * math.pi)
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
# Coarse bracket scan before golden-section refinement.
_N_SCAN = 64


def _numba_requested() -> bool:
    flag = os.environ.get("SEQAB_DISABLE_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


try:
    if not _numba_requested():
        raise ImportError("numba disabled by SEQAB_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[no-redef]
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


BACKEND = "numba" if HAVE_NUMBA else "numpy"


# --------------------------------------------------------------------------
# binomial log-likelihood and pairwise BIC Bayes factor
# --------------------------------------------------------------------------


def _binom_loglik_np(s, n):
    s = np.asarray(s, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    f = n - s
    out = np.zeros(np.broadcast(s, n).shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(s > 0, s * np.log(s / n), 0.0)
        b = np.where(f > 0, f * np.log(f / n), 0.0)
    out = out + a + b
    return out


def pairwise_log_bf_numpy(s0, n0, s, n):
    """Log BIC Bayes factor of each arm versus control (numpy path).

    NaN marks arms whose test is undefined because the arm or the control
    sits at a boundary count (0 or all successes).
    """
    s = np.asarray(s, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    ll_alt = _binom_loglik_np(s0, n0) + _binom_loglik_np(s, n)
    ll_null = _binom_loglik_np(s0 + s, n0 + n)
    out = (ll_alt - ll_null) - 0.5 * np.log(n0 + n)
    bad = (s <= 0) | (s >= n) | (s0 <= 0) | (s0 >= n0)
    out[bad] = np.nan
    return out


@njit(cache=True)
def _binom_loglik_nb(s, n):
    f = n - s
    out = 0.0
    if s > 0:
        out += s * math.log(s / n)
    if f > 0:
        out += f * math.log(f / n)
    return out


@njit(cache=True)
def _pairwise_log_bf_nb(s0, n0, s, n):
    m = s.shape[0]
    out = np.empty(m)
    boundary0 = s0 <= 0 or s0 >= n0
    ll0 = _binom_loglik_nb(s0, n0)
    for r in range(m):
        if boundary0 or s[r] <= 0 or s[r] >= n[r]:
            out[r] = np.nan
            continue
        ll_alt = ll0 + _binom_loglik_nb(s[r], n[r])
        ll_null = _binom_loglik_nb(s0 + s[r], n0 + n[r])
        out[r] = (ll_alt - ll_null) - 0.5 * math.log(n0 + n[r])
    return out


def pairwise_log_bf_numba(s0, n0, s, n):
    return _pairwise_log_bf_nb(
        float(s0),
        float(n0),
        np.ascontiguousarray(s, dtype=np.float64),
        np.ascontiguousarray(n, dtype=np.float64),
    )


# --------------------------------------------------------------------------
# normal-normal marginal likelihood, profiled over the grand mean
# --------------------------------------------------------------------------


def profile_loglik_numpy(tau, y, v):
    w = 1.0 / (v + tau * tau)
    mu = np.sum(w * y) / np.sum(w)
    r = y - mu
    return -0.5 * (np.sum(_LOG_2PI - np.log(w)) + np.sum(w * r * r))


def fit_tau_numpy(y, v, hi, tol):
    y = np.asarray(y, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    grid = hi * (np.arange(_N_SCAN + 1) / _N_SCAN) ** 2
    vals = np.array([profile_loglik_numpy(t, y, v) for t in grid])
    i = int(np.argmax(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, _N_SCAN)]
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = profile_loglik_numpy(c, y, v)
    fd = profile_loglik_numpy(d, y, v)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = profile_loglik_numpy(c, y, v)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = profile_loglik_numpy(d, y, v)
    t = 0.5 * (a + b)
    ft = profile_loglik_numpy(t, y, v)
    if vals[i] > ft:
        t, ft = grid[i], vals[i]
    if vals[0] >= ft:
        t = 0.0
    return float(t)


@njit(cache=True)
def _profile_loglik_nb(tau, y, v):
    m = y.shape[0]
    sw = 0.0
    swy = 0.0
    for r in range(m):
        w = 1.0 / (v[r] + tau * tau)
        sw += w
        swy += w * y[r]
    mu = swy / sw
    acc = 0.0
    for r in range(m):
        w = 1.0 / (v[r] + tau * tau)
        d = y[r] - mu
        acc += (_LOG_2PI - math.log(w)) + w * d * d
    return -0.5 * acc


@njit(cache=True)
def _fit_tau_nb(y, v, hi, tol):
    best_i = 0
    best = -np.inf
    f0 = 0.0
    for k in range(_N_SCAN + 1):
        t = hi * (k / _N_SCAN) ** 2
        f = _profile_loglik_nb(t, y, v)
        if k == 0:
            f0 = f
        if f > best:
            best = f
            best_i = k
    a = hi * (max(best_i - 1, 0) / _N_SCAN) ** 2
    b = hi * (min(best_i + 1, _N_SCAN) / _N_SCAN) ** 2
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = _profile_loglik_nb(c, y, v)
    fd = _profile_loglik_nb(d, y, v)
    while b - a > tol:
        if fc >= fd:
            b = d
            d = c
            fd = fc
            c = b - _INV_PHI * (b - a)
            fc = _profile_loglik_nb(c, y, v)
        else:
            a = c
            c = d
            fc = fd
            d = a + _INV_PHI * (b - a)
            fd = _profile_loglik_nb(d, y, v)
    t = 0.5 * (a + b)
    ft = _profile_loglik_nb(t, y, v)
    if best > ft:
        t = hi * (best_i / _N_SCAN) ** 2
        ft = best
    if f0 >= ft:
        t = 0.0
    return t


def fit_tau_numba(y, v, hi, tol):
    return float(
        _fit_tau_nb(
            np.ascontiguousarray(y, dtype=np.float64),
            np.ascontiguousarray(v, dtype=np.float64),
            float(hi),
            float(tol),
        )
    )


# --------------------------------------------------------------------------
# posterior draws and probability-of-best counting
# --------------------------------------------------------------------------


def draws_from_normals(y, weight, shrunk_sd, mu, mu_sd, z):
    """Map standard normals ``z`` (n_draws x (1 + n_arms)) to log-odds draws.

    Column 0 of ``z`` drives the grand mean; column ``r + 1`` drives arm r.
    """
    mu_star = mu + mu_sd * z[:, :1]
    centre = weight * y + (1.0 - weight) * mu_star
    return centre + shrunk_sd * z[:, 1:]


def prob_best_from_draws_numpy(draws):
    """Row-max shares, tallied in exact integer units of 1/lcm(tie sizes)."""
    draws = np.asarray(draws, dtype=np.float64)
    n_draws = draws.shape[0]
    is_max = draws == draws.max(axis=1, keepdims=True)
    ties = is_max.sum(axis=1)
    unit = math.lcm(*(int(k) for k in np.unique(ties)))
    if unit * n_draws < 2**53:
        wins = ((unit // ties)[:, None] * is_max).sum(axis=0)
        return wins / (unit * n_draws)
    return (is_max / ties[:, None]).sum(axis=0) / n_draws


def prob_best_numpy(y, weight, shrunk_sd, mu, mu_sd, z):
    return prob_best_from_draws_numpy(draws_from_normals(y, weight, shrunk_sd, mu, mu_sd, z))


@njit(cache=True)
def _prob_best_nb(y, weight, shrunk_sd, mu, mu_sd, z):
    n_draws = z.shape[0]
    m = y.shape[0]
    wins = np.zeros(m)
    row = np.empty(m)
    for i in range(n_draws):
        mu_star = mu + mu_sd * z[i, 0]
        top = -np.inf
        for r in range(m):
            centre = weight[r] * y[r] + (1.0 - weight[r]) * mu_star
            a = centre + shrunk_sd[r] * z[i, r + 1]
            row[r] = a
            if a > top:
                top = a
        k = 0
        for r in range(m):
            if row[r] == top:
                k += 1
        for r in range(m):
            if row[r] == top:
                wins[r] += 1.0 / k
    return wins / n_draws


def prob_best_numba(y, weight, shrunk_sd, mu, mu_sd, z):
    return _prob_best_nb(
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(weight, dtype=np.float64),
        np.ascontiguousarray(shrunk_sd, dtype=np.float64),
        float(mu),
        float(mu_sd),
        np.ascontiguousarray(z, dtype=np.float64),
    )


if HAVE_NUMBA:
    pairwise_log_bf = pairwise_log_bf_numba
    fit_tau = fit_tau_numba
    prob_best_kernel = prob_best_numba
else:
    pairwise_log_bf = pairwise_log_bf_numpy
    fit_tau = fit_tau_numpy
    prob_best_kernel = prob_best_numpy
