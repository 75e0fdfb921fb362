"""Command-line front end.

    seqab simulate  --config cfg.txt --out DIR [--workers N]
    seqab analyze   --data data.csv --alpha 0.05 --control A [--format text|csv]
    seqab compare   --config cfg.txt --out DIR [--workers N]
    seqab plot-data --trajectories DIR/trajectories.csv --out means.csv

Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, _accel
from .decision import Direction, State, direction_of, reject_test, threshold_two_sided
from .engine import ConfigError, ExperimentConfig, Method, aggregate, run_trials
from .files import (
    DataError,
    config_to_text,
    load_config,
    mean_trajectories,
    read_outcomes,
    write_manifest,
    write_metrics,
    write_plot_data,
    write_trajectories,
)
from .glm import ArmCounts, BoundaryCountError, pairwise_bayes_factor
from .pooling import arm_logit_summaries, fit_hierarchical, posterior_draws, prob_best

log = logging.getLogger("seqab")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _manifest(cfg: ExperimentConfig, command: str, started: str, outputs: list[Path], workers) -> dict:
    return {
        "software": "seqab",
        "version": __version__,
        "backend": _accel.BACKEND,
        "command": command,
        "config": {k: (v.value if isinstance(v, Method) else v) for k, v in dataclasses.asdict(cfg).items()},
        "config_text": config_to_text(cfg),
        "seed": cfg.seed,
        "workers": workers,
        "started": started,
        "finished": _now(),
        "outputs": [str(p) for p in outputs],
    }


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    t0 = time.perf_counter()
    results = run_trials(cfg, args.workers)
    metrics = aggregate(results, cfg)
    paths = [out / "metrics.csv", out / "trajectories.csv", out / "manifest.json"]
    write_metrics(paths[0], metrics)
    write_trajectories(paths[1], results)
    write_manifest(paths[2], _manifest(cfg, "simulate", started, paths, args.workers))
    log.info("simulated %d trials in %.1fs -> %s", cfg.n_trials, time.perf_counter() - t0, out)
    return EXIT_OK


def cmd_compare(args) -> int:
    base = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    summary = {}
    paths = []
    for method in Method:
        cfg = dataclasses.replace(base, method=method)
        metrics = aggregate(run_trials(cfg, args.workers), cfg)
        path = out / f"metrics_{method.value.lower()}.csv"
        write_metrics(path, metrics)
        paths.append(path)
        summary[method] = metrics
    path = out / "comparison.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric"] + [m.value for m in Method])
        for name in ("fwer", "fdr", "overall_error_rate", "overall_error_rate_se", "avg_n_nonnull", "avg_n_nonnull_se"):
            w.writerow([name] + [f"{getattr(summary[m], name):.10g}" for m in Method])
    paths += [path, out / "manifest.json"]
    write_manifest(paths[-1], _manifest(base, "compare", started, paths, args.workers))
    return EXIT_OK


def analyze_counts(counts: dict[str, tuple[int, int]], control: str, alpha: float,
                   n_draws: int = 4000, seed: int = 0) -> list[dict]:
    """Interim report for observed per-arm ``(n, successes)`` counts."""
    if control not in counts:
        raise DataError(f"control label {control!r} not found in data")
    labels = [control] + [k for k in counts if k != control]
    arm_counts = [ArmCounts(i, *counts[lab]) for i, lab in enumerate(labels)]
    c = threshold_two_sided(alpha)
    summaries = arm_logit_summaries(arm_counts)
    if len(summaries) >= 2:
        fit = fit_hierarchical(summaries)
        shrunk = fit.shrunk_mean
        pb = prob_best(posterior_draws(fit, n_draws, seed))
    else:
        shrunk = np.array([summaries[0].y])
        pb = np.ones(1)
    report = []
    for i, (lab, ac) in enumerate(zip(labels, arm_counts)):
        row = {
            "arm": lab,
            "n": ac.n,
            "successes": ac.s,
            "raw_rate": ac.s / ac.n,
            "shrunk_rate": float(1.0 / (1.0 + np.exp(-shrunk[i]))),
            "bf": float("nan"),
            "decision": "Control" if i == 0 else State.CONTINUE.value,
            "direction": "",
            "prob_best": float(pb[i]),
        }
        if i > 0:
            try:
                bf = pairwise_bayes_factor(arm_counts[0], ac)
            except BoundaryCountError:
                bf = float("nan")
            row["bf"] = bf
            if bf == bf and reject_test(bf, c):
                row["decision"] = State.REJECT_NULL.value
                raw = summaries[i].y - summaries[0].y
                row["direction"] = direction_of(float(shrunk[i] - shrunk[0]), raw).value
        report.append(row)
    return report


REPORT_COLUMNS = ("arm", "n", "successes", "raw_rate", "shrunk_rate", "bf", "decision", "direction", "prob_best")


def cmd_analyze(args) -> int:
    if not 0 < args.alpha < 1:
        raise ConfigError("alpha", "must lie in (0, 1)")
    report = analyze_counts(read_outcomes(args.data), args.control, args.alpha, args.draws, args.seed)
    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in report:
            w.writerow([_cell(row[k]) for k in REPORT_COLUMNS])
    else:
        print(f"threshold (alpha={args.alpha:g}): BF >= {threshold_two_sided(args.alpha):.4g}")
        print(f"{'arm':<12}{'n':>9}{'succ':>9}{'raw':>9}{'shrunk':>9}{'BF':>12}  {'decision':<22}{'P(best)':>8}")
        for row in report:
            dec = row["decision"] + (f"/{row['direction']}" if row["direction"] else "")
            bf = "-" if row["bf"] != row["bf"] else f"{row['bf']:.4g}"
            print(f"{row['arm']:<12}{row['n']:>9}{row['successes']:>9}{row['raw_rate']:>9.4f}"
                  f"{row['shrunk_rate']:>9.4f}{bf:>12}  {dec:<22}{row['prob_best']:>8.3f}")
    return EXIT_OK


def _cell(x) -> str:
    if isinstance(x, float):
        return "" if x != x else f"{x:.10g}"
    return str(x)


def cmd_plot_data(args) -> int:
    write_plot_data(args.out, mean_trajectories(args.trajectories))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seqab", description=__doc__.splitlines()[0] if __doc__ else None)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a Monte Carlo campaign")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="interim decision report for observed data")
    a.add_argument("--data", required=True)
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--control", required=True)
    a.add_argument("--format", choices=("text", "csv"), default="text")
    a.add_argument("--draws", type=int, default=4000)
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("compare", help="Proposed vs JPW on shared seeds")
    c.add_argument("--config", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--workers", type=int, default=None)
    c.set_defaults(func=cmd_compare)

    d = sub.add_parser("plot-data", help="per-look mean prob-best for plotting")
    d.add_argument("--trajectories", required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_plot_data)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, DataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
