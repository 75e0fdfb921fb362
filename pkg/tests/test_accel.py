"""The numba kernels and their numpy fallbacks must agree."""

import numpy as np
import pytest

from seqab import _accel

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba path disabled")


def test_pairwise_log_bf_backends_agree():
    rng = np.random.default_rng(0)
    n = rng.integers(500, 20_000, 50).astype(float)
    s = np.floor(n * rng.uniform(0, 1, 50))
    s[:3] = [0, n[1], 7]
    a = _accel.pairwise_log_bf_numpy(812.0, 1500.0, s, n)
    b = _accel.pairwise_log_bf_numba(812.0, 1500.0, s, n)
    np.testing.assert_array_equal(np.isnan(a), np.isnan(b))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-10)


def test_fit_tau_backends_agree():
    rng = np.random.default_rng(1)
    for _ in range(100):
        m = rng.integers(2, 12)
        y = rng.normal(0, 0.3, m)
        v = rng.uniform(1e-4, 0.2, m)
        assert _accel.fit_tau_numba(y, v, 5.0, 1e-8) == pytest.approx(
            _accel.fit_tau_numpy(y, v, 5.0, 1e-8), abs=1e-7
        )


def test_prob_best_backends_agree():
    rng = np.random.default_rng(2)
    m = 6
    y = rng.normal(0, 0.1, m)
    v = rng.uniform(0.001, 0.01, m)
    w = 0.01 / (0.01 + v)
    z = rng.standard_normal((4000, m + 1))
    a = _accel.prob_best_numpy(y, w, np.sqrt(0.01 * v / (0.01 + v)), 0.0, 0.03, z)
    b = _accel.prob_best_numba(y, w, np.sqrt(0.01 * v / (0.01 + v)), 0.0, 0.03, z)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_disable_flag(monkeypatch):
    monkeypatch.setenv("SEQAB_DISABLE_NUMBA", "1")
    assert not _accel._numba_requested()
    monkeypatch.setenv("SEQAB_DISABLE_NUMBA", "0")
    assert _accel._numba_requested()
