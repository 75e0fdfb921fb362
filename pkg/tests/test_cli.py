import csv
import json
import math

import numpy as np
import pytest

from seqab.cli import analyze_counts, main
from seqab.engine import ConfigError, ExperimentConfig, aggregate, run_trials
from seqab.files import (
    config_to_text,
    fmt,
    load_config,
    parse_config_text,
    read_metrics,
    write_metrics,
)

SMALL = """\
# four arms, few trials
p0 = 0.1
p_r = 0.1, 0.12, 0.14
batch = 500
cap = 3000
n_draws = 200
n_trials = 6
seed = 17
"""


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def _outcomes(path, arms):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["arm", "outcome"])
        for label, n, s in arms:
            for i in range(n):
                w.writerow([label, int(i < s)])
    return path


@pytest.mark.parametrize("line, key", [
    ("p0 = 0.1\np_r = 0.1\nbatchh = 5\n", "batchh"),
    ("p0 = 0.1\np_r = 0.1\ncap = 750\n", "cap"),
    ("p0 = 0.1\np_r = 0.1\nalpha = zero\n", "alpha"),
    ("p0 = 0.1\np0 = 0.2\np_r = 0.1\n", "p0"),
    ("p0 = 0.1\n", "p_r"),
    ("p0 = 0.1\np_r = 0.1\nmethod = magic\n", "method"),
])
def test_config_errors_name_the_key(line, key):
    with pytest.raises(ConfigError) as exc:
        parse_config_text(line)
    assert exc.value.key == key


def test_config_text_round_trip():
    cfg = parse_config_text(SMALL + "adaptive_h = 0.5\nmethod = JPW\n")
    assert parse_config_text(config_to_text(cfg)) == cfg


def test_bad_config_exits_1(tmp_path, capsys):
    cfg = _write(tmp_path / "c.txt", "p0 = 0.1\np_r = 0.1\nbatch = -5\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "batch" in capsys.readouterr().err


def test_missing_config_exits_1(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.txt"), "--out", str(tmp_path)]) == 1


def test_single_look_campaign(tmp_path):
    cfg = _write(tmp_path / "c.txt", "p0 = 0.3\np_r = 0.3, 0.3\nbatch = 500\ncap = 500\nn_trials = 1\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o"), "--workers", "1"]) == 0
    with open(tmp_path / "o" / "trajectories.csv", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    arms = [r for r in rows if r["arm"] != "0"]
    assert len(arms) == 2
    assert all(r["look"] == "1" and r["decision"] == "AcceptNullAtCap" for r in arms)


def test_simulate_is_reproducible(tmp_path):
    cfg = _write(tmp_path / "c.txt", SMALL)
    outs = []
    for i, workers in enumerate(("1", "1", "3")):
        out = tmp_path / f"o{i}"
        assert main(["simulate", "--config", str(cfg), "--out", str(out), "--workers", workers]) == 0
        outs.append(out)
    ref = (outs[0] / "metrics.csv").read_bytes()
    for out in outs[1:]:
        assert (out / "metrics.csv").read_bytes() == ref
        assert (out / "trajectories.csv").read_bytes() == (outs[0] / "trajectories.csv").read_bytes()
    manifest = json.loads((outs[0] / "manifest.json").read_text())
    assert manifest["seed"] == 17 and manifest["config"]["n_trials"] == 6
    # the manifest alone is enough to rerun the campaign
    assert load_config(outs[0] / "manifest.json") == load_config(cfg)
    again = tmp_path / "again"
    assert main(["simulate", "--config", str(outs[0] / "manifest.json"), "--out", str(again)]) == 0
    assert (again / "metrics.csv").read_bytes() == ref


def test_metrics_round_trip(tmp_path):
    cfg = parse_config_text(SMALL)
    m = aggregate(run_trials(cfg, 1), cfg)
    write_metrics(tmp_path / "m.csv", m)
    back = read_metrics(tmp_path / "m.csv")
    for name in ("rate", "n_bar", "fixed_power", "fixed_power_bonferroni"):
        a, b = getattr(m, name), getattr(back, name)
        assert np.array_equal(np.isnan(a), np.isnan(b))
        ok = ~np.isnan(a)
        np.testing.assert_allclose(b[ok], a[ok], rtol=1e-9)
    for name in ("fwer", "fdr", "per_test_alpha", "overall_error_rate"):
        assert getattr(back, name) == pytest.approx(getattr(m, name), rel=1e-9)


def test_fmt():
    assert fmt(float("nan")) == ""
    assert fmt(1 / 3) == "0.3333333333"
    assert fmt(20000.0) == "20000"


def test_analyze_identical_arms_continue():
    rep = analyze_counts({"A": (1000, 300), "B": (1000, 300)}, "A", 0.05)
    assert rep[1]["bf"] < 1
    assert rep[1]["decision"] == "Continue"
    assert rep[0]["prob_best"] == pytest.approx(0.5, abs=0.03)
    assert rep[1]["prob_best"] == pytest.approx(0.5, abs=0.03)


def test_analyze_clear_winner():
    rep = analyze_counts({"ctl": (10_000, 500), "new": (10_000, 650)}, "ctl", 0.05)
    assert rep[1]["bf"] >= 39
    assert (rep[1]["decision"], rep[1]["direction"]) == ("RejectNull", "Superior")


def test_analyze_cli_csv(tmp_path, capsys):
    data = _outcomes(tmp_path / "d.csv", [("A", 400, 100), ("B", 400, 180), ("C", 400, 95)])
    assert main(["analyze", "--data", str(data), "--control", "A", "--format", "csv"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert [r["arm"] for r in rows] == ["A", "B", "C"]
    assert rows[1]["decision"] == "RejectNull" and rows[1]["direction"] == "Superior"
    assert rows[0]["bf"] == ""
    assert math.fsum(float(r["prob_best"]) for r in rows) == pytest.approx(1.0)


def test_analyze_text(tmp_path, capsys):
    data = _outcomes(tmp_path / "d.csv", [("A", 50, 10), ("B", 50, 12)])
    assert main(["analyze", "--data", str(data), "--control", "A"]) == 0
    assert "BF >= 39" in capsys.readouterr().out


def test_analyze_bad_outcome_names_line(tmp_path, capsys):
    data = _write(tmp_path / "d.csv", "arm,outcome\nA,1\nB,0\nB,2\n")
    assert main(["analyze", "--data", str(data), "--control", "A"]) == 1
    assert "line 4" in capsys.readouterr().err


def test_analyze_unknown_control(tmp_path, capsys):
    data = _outcomes(tmp_path / "d.csv", [("A", 10, 3), ("B", 10, 4)])
    assert main(["analyze", "--data", str(data), "--control", "Z"]) == 1
    assert "Z" in capsys.readouterr().err


def test_compare_and_plot_data(tmp_path):
    cfg = _write(tmp_path / "c.txt", SMALL)
    out = tmp_path / "cmp"
    assert main(["compare", "--config", str(cfg), "--out", str(out), "--workers", "1"]) == 0
    for name in ("metrics_proposed.csv", "metrics_jpw.csv", "comparison.csv", "manifest.json"):
        assert (out / name).exists()
    with open(out / "comparison.csv", encoding="utf-8") as fh:
        rows = {r[0]: r[1:] for r in csv.reader(fh)}
    assert rows["metric"] == ["Proposed", "JPW"]
    assert "avg_n_nonnull" in rows

    sim = tmp_path / "sim"
    assert main(["simulate", "--config", str(cfg), "--out", str(sim), "--workers", "1"]) == 0
    plot = tmp_path / "plot.csv"
    assert main(["plot-data", "--trajectories", str(sim / "trajectories.csv"), "--out", str(plot)]) == 0
    with open(plot, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    n_looks = ExperimentConfig(0.1, (0.1,), cap=3000).n_looks
    assert len(rows) == n_looks * 4
    for look in range(1, n_looks + 1):
        total = math.fsum(float(r["mean_prob_best"]) for r in rows if r["look"] == str(look))
        assert total == pytest.approx(1.0, abs=1e-9)
