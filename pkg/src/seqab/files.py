"""Flat-file formats: key=value configs, metrics/trajectory CSVs, run manifests.

All files are UTF-8, comma-delimited with a header row and LF line endings.
Floats are written with 10 significant digits; a missing value is an empty
field.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .engine import STATE_FROM_CODE, AggregateMetrics, ConfigError, ExperimentConfig, Method, TrialResult

CONFIG_KEYS = ("p0", "p_r", "batch", "cap", "alpha", "n_draws", "method", "n_trials", "seed", "adaptive_h")
METRICS_COLUMNS = (
    "row", "p0", "p_r", "power_or_alpha", "n_bar", "fixed_power", "fixed_power_bonferroni", "value",
)
FOOTER_ROWS = ("fwer", "fdr", "per_test_alpha", "overall_error_rate")
TRAJECTORY_COLUMNS = ("trial", "look", "arm", "n", "bf", "prob_best", "decision")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return ""
    return f"{x:.10g}"


def _num(field: str) -> float:
    return float("nan") if field == "" else float(field)


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


# --------------------------------------------------------------------------
# config
# --------------------------------------------------------------------------


def _parse_value(key: str, raw: str):
    try:
        if key == "p_r":
            vals = tuple(float(x) for x in raw.split(",") if x.strip())
            if not vals:
                raise ValueError("empty list")
            return vals
        if key in ("p0", "alpha"):
            return float(raw)
        if key == "adaptive_h":
            return None if raw.lower() in ("", "none", "off") else float(raw)
        if key in ("batch", "cap", "n_draws", "n_trials", "seed"):
            return int(raw)
        if key == "method":
            for m in Method:
                if raw.lower() == m.value.lower():
                    return m
            raise ValueError(f"expected one of {[m.value for m in Method]}")
    except ValueError as exc:
        raise ConfigError(key, f"bad value {raw!r} ({exc})") from None
    raise ConfigError(key, "unknown key")


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys are errors."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(key, "unknown key")
        if key in values:
            raise ConfigError(key, "given twice")
        values[key] = _parse_value(key, raw)
    for key in ("p0", "p_r"):
        if key not in values:
            raise ConfigError(key, "missing required key")
    return ExperimentConfig(**values)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a key=value config, or the config echoed inside a run manifest."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        try:
            text = json.loads(text)["config_text"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise ConfigError("manifest", f"{path} is not a run manifest") from None
    return parse_config_text(text)


def config_to_text(cfg: ExperimentConfig) -> str:
    lines = [
        f"p0 = {cfg.p0!r}",
        "p_r = " + ",".join(repr(p) for p in cfg.p_r),
        f"batch = {cfg.batch}",
        f"cap = {cfg.cap}",
        f"alpha = {cfg.alpha!r}",
        f"n_draws = {cfg.n_draws}",
        f"method = {cfg.method.value}",
        f"n_trials = {cfg.n_trials}",
        f"seed = {cfg.seed}",
    ]
    if cfg.adaptive_h is not None:
        lines.append(f"adaptive_h = {cfg.adaptive_h!r}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# metrics.csv
# --------------------------------------------------------------------------


def write_metrics(path: str | Path, metrics: AggregateMetrics) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(METRICS_COLUMNS)
        for r, pr in enumerate(metrics.p_r):
            w.writerow([
                f"arm{r + 1}",
                fmt(metrics.p0),
                fmt(pr),
                fmt(metrics.rate[r]),
                fmt(metrics.n_bar[r]),
                fmt(metrics.fixed_power[r]),
                fmt(metrics.fixed_power_bonferroni[r]),
                "",
            ])
        for name in FOOTER_ROWS:
            w.writerow([name, "", "", "", "", "", "", fmt(getattr(metrics, name))])


def read_metrics(path: str | Path) -> AggregateMetrics:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    arms = [r for r in rows if r["row"].startswith("arm")]
    footer = {r["row"]: _num(r["value"]) for r in rows if r["row"] in FOOTER_ROWS}
    missing = set(FOOTER_ROWS) - set(footer)
    if not arms or missing:
        raise ValueError(f"{path}: incomplete metrics file (missing {sorted(missing)})")
    col = lambda k: np.array([_num(r[k]) for r in arms])  # noqa: E731
    return AggregateMetrics(
        p0=_num(arms[0]["p0"]),
        p_r=tuple(col("p_r")),
        rate=col("power_or_alpha"),
        n_bar=col("n_bar"),
        fixed_power=col("fixed_power"),
        fixed_power_bonferroni=col("fixed_power_bonferroni"),
        **footer,
    )


# --------------------------------------------------------------------------
# trajectories.csv
# --------------------------------------------------------------------------


def trajectory_rows(results: Iterable[TrialResult]):
    for res in results:
        for j in range(res.n_looks_run):
            yield [res.trial_index, j + 1, 0, fmt(res.n_path[j, 0]), "", fmt(res.prob_best_path[j, 0]), ""]
            for r in range(res.bf_path.shape[1]):
                code = int(res.state_path[j, r])
                state = STATE_FROM_CODE[code].value if code >= 0 else ""
                yield [
                    res.trial_index,
                    j + 1,
                    r + 1,
                    fmt(res.n_path[j, r + 1]),
                    fmt(res.bf_path[j, r]),
                    fmt(res.prob_best_path[j, r + 1]),
                    state,
                ]


def write_trajectories(path: str | Path, results: Sequence[TrialResult]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        w.writerows(trajectory_rows(results))


def mean_trajectories(path: str | Path) -> list[tuple[int, int, float, float]]:
    """Per (look, arm) averages of n and prob_best across trials.

    A trial that stopped before the last look contributes its final values to
    every later look.
    """
    per_trial: dict[int, dict[int, dict[int, tuple[float, float]]]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != list(TRAJECTORY_COLUMNS):
            raise ValueError(f"{path}: expected header {','.join(TRAJECTORY_COLUMNS)}")
        for lineno, row in enumerate(reader, 2):
            try:
                t, j, a = int(row["trial"]), int(row["look"]), int(row["arm"])
                per_trial.setdefault(t, {}).setdefault(j, {})[a] = (float(row["n"]), float(row["prob_best"]))
            except (TypeError, ValueError):
                raise ValueError(f"{path}: malformed row at line {lineno}") from None
    if not per_trial:
        raise ValueError(f"{path}: no trajectory rows")
    n_looks = max(max(looks) for looks in per_trial.values())
    arms = sorted({a for looks in per_trial.values() for row in looks.values() for a in row})
    sum_n = np.zeros((n_looks, len(arms)))
    sum_pb = np.zeros((n_looks, len(arms)))
    for looks in per_trial.values():
        last = None
        for j in range(1, n_looks + 1):
            row = looks.get(j, last)
            last = row
            for k, a in enumerate(arms):
                n_val, pb_val = row[a]
                sum_n[j - 1, k] += n_val
                sum_pb[j - 1, k] += pb_val
    T = len(per_trial)
    return [
        (j + 1, a, sum_n[j, k] / T, sum_pb[j, k] / T)
        for j in range(n_looks)
        for k, a in enumerate(arms)
    ]


def write_plot_data(path: str | Path, rows: Sequence[tuple[int, int, float, float]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(("look", "arm", "mean_n", "mean_prob_best"))
        for look, arm, n_val, pb in rows:
            w.writerow([look, arm, fmt(n_val), fmt(pb)])


# --------------------------------------------------------------------------
# binary outcome data for `analyze`
# --------------------------------------------------------------------------


class DataError(ValueError):
    pass


def read_outcomes(path: str | Path) -> dict[str, tuple[int, int]]:
    """Per-arm ``(n, successes)`` from an ``arm,outcome`` file, in order of first appearance."""
    counts: dict[str, list[int]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["arm", "outcome"]:
            raise DataError(f"{path}: line 1: header must be 'arm,outcome'")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 2 or not row[0].strip():
                raise DataError(f"{path}: line {lineno}: expected 'arm,outcome'")
            label, outcome = row[0].strip(), row[1].strip()
            if outcome not in ("0", "1"):
                raise DataError(f"{path}: line {lineno}: outcome must be 0 or 1, got {outcome!r}")
            c = counts.setdefault(label, [0, 0])
            c[0] += 1
            c[1] += int(outcome)
    return {k: (v[0], v[1]) for k, v in counts.items()}


def write_manifest(path: str | Path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
