import csv
import json

import numpy as np
import pytest

from oce_risk.errors import DomainError
from oce_risk.harness import (
    DEFAULT_GRID,
    EXPERIMENTS,
    ExperimentConfig,
    ExperimentError,
    loglog_slope,
    run_experiment,
    write_csv,
)

SMALL = {
    "fig1_batch_normal": (100, 1000),
    "fig2_stream_normal": (100, 500),
    "fig3_credit": (100, 500),
    "bound_dominance": (100, 1000),
    "bandit_study": (200, 400),
}


def read_rows(path):
    with open(path) as fh:
        first = fh.readline()
        return first, list(csv.DictReader(fh))


def test_config_validation():
    assert ExperimentConfig("fig1_batch_normal").sample_grid == DEFAULT_GRID["fig1_batch_normal"]
    for kwargs in ({"experiment": "fig4"}, {"experiment": "fig3_credit", "reps": 0},
                   {"experiment": "fig3_credit", "grid": (100, 100)}, {"experiment": "fig3_credit", "grid": (500, 100)},
                   {"experiment": "fig3_credit", "seed": -1}):
        with pytest.raises(DomainError):
            ExperimentConfig(**kwargs)
    cfg = ExperimentConfig("fig2_stream_normal", overrides={"b": "3", "alpha": "0.7,0.9"})
    assert cfg.get("b", 10.0) == 3.0 and cfg.get("alpha", (0.6,)) == (0.7, 0.9) and cfg.get("t0", 1.0) == 1.0


def test_default_grids():
    assert DEFAULT_GRID["fig1_batch_normal"] == (100, 316, 1000, 3162, 10_000, 31_623, 100_000)
    assert DEFAULT_GRID["fig2_stream_normal"] == DEFAULT_GRID["fig3_credit"] == (100, 500, 1000, 2000, 5000)


@pytest.mark.parametrize("name", EXPERIMENTS)
def test_reruns_are_byte_identical(name, tmp_path):
    cfg = ExperimentConfig(name, reps=3, seed=5, grid=SMALL[name], overrides={"b": "10"} if name == "fig3_credit" else {})
    a = run_experiment(cfg, str(tmp_path / "a"))
    b = run_experiment(cfg, str(tmp_path / "b"))
    assert [f.rsplit("/", 1)[1] for f in a.files] == [f.rsplit("/", 1)[1] for f in b.files]
    for fa, fb in zip(a.files, b.files):
        with open(fa, "rb") as x, open(fb, "rb") as y:
            assert x.read() == y.read()
    first, rows = read_rows(a.files[0])
    assert first == "# seed=5 version=0.1.0\n"
    assert rows
    summary = json.loads(open(a.files[-1]).read())
    assert summary["experiment"] == name and summary["passed"] == a.passed
    assert all({"name", "passed", "measured", "required"} <= set(c) for c in summary["checks"])


def test_csv_layout(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(str(path), ("n", "x"), [(1, 0.1), (2, np.float64(1 / 3))], seed=9)
    assert path.read_text() == "# seed=9 version=0.1.0\nn,x\n1,0.1\n2,0.3333333333333333\n"


def test_column_sets(tmp_path):
    expect = {
        "fig1_batch_normal": ["n", "mean_abs_err_e", "mean_abs_err_oce", "se_e", "se_oce", "mse_e", "se_mse_e"],
        "fig2_stream_normal": ["m", "alpha", "mse_tbar", "se_mse_tbar", "mae_oce", "se_mae_oce", "mean_tbar"],
        "bound_dominance": ["n", "eps", "target", "freq", "se", "bound_raw", "bound_capped", "dominated"],
        "bandit_study": ["n", "misid_rate", "se", "bound_raw", "bound_capped"],
    }
    for name, cols in expect.items():
        res = run_experiment(ExperimentConfig(name, reps=2, grid=SMALL[name]), str(tmp_path))
        _, rows = read_rows(res.files[0])
        assert list(rows[0]) == cols


def test_loglog_slope():
    n = np.array([10, 100, 1000])
    assert loglog_slope(n, 3.0 / n) == pytest.approx(-1.0)


def test_fig1_checks_pass(tmp_path):
    res = run_experiment(ExperimentConfig("fig1_batch_normal", reps=200, grid=(100, 1000, 10_000)), str(tmp_path))
    assert res.passed, res.checks


def test_fig3_at_step_scale_100_fails_its_checks(tmp_path):
    res = run_experiment(ExperimentConfig("fig3_credit", reps=20, grid=(100, 5000)), str(tmp_path))
    assert not res.passed
    summary = json.loads(open(res.files[-1]).read())
    assert summary["passed"] is False and summary["error"] is None


def test_fig3_regression_pin(tmp_path):
    # frozen from a verified run: seed 42, 50 replications, b=10
    res = run_experiment(ExperimentConfig("fig3_credit", reps=50, seed=42, overrides={"b": "10"}), str(tmp_path))
    _, rows = read_rows(res.files[0])
    final = {float(r["alpha"]): float(r["mae_oce"]) for r in rows if r["m"] == "5000"}
    assert final[0.6] == pytest.approx(0.04558017566496484, rel=1e-9)
    assert final[0.8] == pytest.approx(0.04557976383075218, rel=1e-9)
    assert res.passed


def test_errors_carry_a_coordinate(tmp_path):
    cfg = ExperimentConfig("fig2_stream_normal", reps=3, grid=(10, 20), overrides={"b": "1e300"})
    with pytest.raises(ExperimentError) as err:
        run_experiment(cfg, str(tmp_path))
    name, rep, step = err.value.coordinate
    assert name == "fig2_stream_normal" and 0 <= rep < 3 and 1 <= step <= 20
    summary = json.loads((tmp_path / "fig2_stream_normal_summary.json").read_text())
    assert summary["passed"] is False and "non-finite" in summary["error"]
