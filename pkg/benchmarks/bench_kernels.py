"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 20] [--trials 5]

Kernel timings call both implementations in-process. The end-to-end timing
runs ``run_trial`` in a fresh interpreter per backend, because the backend is
chosen once at import from ``SEQAB_DISABLE_NUMBA``.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from seqab import _accel

TRIAL_SNIPPET = """
import time
from seqab import _accel
from seqab.engine import ExperimentConfig, run_trial
cfg = ExperimentConfig(0.5, (0.48, 0.49, 0.5, 0.5, 0.5, 0.5, 0.5, 0.51, 0.52, 0.53), n_draws=4000)
run_trial(cfg, 0)  # warm-up (numba compile or cache load)
t0 = time.perf_counter()
for i in range(1, {trials} + 1):
    run_trial(cfg, i)
print(_accel.BACKEND, (time.perf_counter() - t0) / {trials})
"""


def best_of(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_inputs(rng, m=10):
    n = np.full(m, 10_000.0)
    s = np.floor(n * rng.uniform(0.45, 0.55, m))
    y = rng.normal(0, 0.05, m + 1)
    v = rng.uniform(0.0003, 0.0005, m + 1)
    return s, n, y, v


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--trials", type=int, default=5)
    args = ap.parse_args()

    if not _accel.HAVE_NUMBA:
        sys.exit("numba is not available (or SEQAB_DISABLE_NUMBA is set); nothing to compare")

    rng = np.random.default_rng(0)
    s, n, y, v = kernel_inputs(rng)
    tau = _accel.fit_tau_numpy(y, v, 5.0, 1e-8)
    w = tau**2 / (tau**2 + v)
    sd = np.sqrt(tau**2 * v / (tau**2 + v))
    z = rng.standard_normal((4000, y.size + 1))

    cases = {
        "pairwise_log_bf (10 arms)": (
            lambda: _accel.pairwise_log_bf_numpy(5000.0, 10_000.0, s, n),
            lambda: _accel.pairwise_log_bf_numba(5000.0, 10_000.0, s, n),
        ),
        "fit_tau (11 arms)": (
            lambda: _accel.fit_tau_numpy(y, v, 5.0, 1e-8),
            lambda: _accel.fit_tau_numba(y, v, 5.0, 1e-8),
        ),
        "prob_best (4000 x 11)": (
            lambda: _accel.prob_best_numpy(y, w, sd, 0.0, 0.01, z),
            lambda: _accel.prob_best_numba(y, w, sd, 0.0, 0.01, z),
        ),
    }
    print(f"{'kernel':<28}{'numpy [us]':>12}{'numba [us]':>12}{'speed-up':>10}")
    for name, (f_np, f_nb) in cases.items():
        t_np = best_of(f_np, args.repeat) * 1e6
        t_nb = best_of(f_nb, args.repeat) * 1e6
        print(f"{name:<28}{t_np:>12.1f}{t_nb:>12.1f}{t_np / t_nb:>9.1f}x")

    print(f"\nrun_trial, 10 arms, cap 20000, mean of {args.trials} trials:")
    code = TRIAL_SNIPPET.format(trials=args.trials)
    times = {}
    for flag in ("0", "1"):
        env = dict(os.environ, SEQAB_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, check=True, capture_output=True, text=True)
        backend, secs = out.stdout.split()
        times[backend] = float(secs)
        print(f"  {backend:<6} {float(secs) * 1e3:8.1f} ms/trial")
    print(f"  speed-up {times['numpy'] / times['numba']:.1f}x")


if __name__ == "__main__":
    main()
