import json
import math

import numpy as np
import pytest

from ridgesketch import cli
from ridgesketch.config import ExperimentConfig
from ridgesketch.core_types import RngStream
from ridgesketch.estimators import SketchSpec
from ridgesketch.experiments import (RESULT_COLUMNS, TIMING_COLUMNS, _fwht, apply_sketch, default_lam_grid,
                                     run_experiment, timing_benchmark)

SMALL = dict(n=120, alpha=3.0, sigma=1.0, replicates=3, seed=5)
KINDS = [
    dict(kind="ridge_risk", gamma=0.5, lam_grid=(0.1, 1.0)),
    dict(kind="bias_variance", gamma_grid=(0.2, 1.0, 3.0), n=60),
    dict(kind="representation", gamma=0.5, lam=1.0),
    dict(kind="primal_orth", gamma=2.0, lam=1.0, ratios=(0.5,)),
    dict(kind="dual_orth", gamma=2.0, lam=1.0, ratios=(0.5,), sketch_family="srht"),
    dict(kind="full", gamma=0.3, ratios=(0.5, 1.0), sketch_family="subsample"),
    dict(kind="marginal", gamma=0.7),
    dict(kind="dual_gaussian", gamma=0.4, ratios=(0.5, 1.0), alpha=1.0),
    dict(kind="primal_gaussian", gamma=2.0, ratios=(0.5,), proxy_n=200, alpha=1.0),
    dict(kind="cv", p=60),
    dict(kind="loo", p=60),
]


def _cfg(**kw):
    return ExperimentConfig(**{**SMALL, **kw})


def _numeric(table):
    return [[row[c] for c in table.columns] for row in table.rows]


def _same(a, b):
    return all((x == y) or (isinstance(x, float) and math.isnan(x) and math.isnan(y))
               for ra, rb in zip(a, b) for x, y in zip(ra, rb)) and len(a) == len(b)


@pytest.mark.parametrize("spec", KINDS, ids=[k["kind"] for k in KINDS])
def test_every_kind_runs_and_is_deterministic(spec):
    t1 = run_experiment(_cfg(**spec, threads=1))
    t2 = run_experiment(_cfg(**spec, threads=3))
    assert t1.columns == RESULT_COLUMNS
    assert t1.rows and _same(_numeric(t1), _numeric(t2))
    assert t1.meta["config_hash"] == _cfg(**spec).config_hash()
    assert all(r["seed"] == 5 for r in t1.rows)
    mc_rows = [r for r in t1.rows if r["replicates"] > 0]
    assert mc_rows and all(r["replicates"] == 3 for r in mc_rows)


def test_seed_changes_mc_only():
    a = run_experiment(_cfg(kind="ridge_risk", gamma=0.5))
    b = run_experiment(_cfg(kind="ridge_risk", gamma=0.5, seed=6))
    assert a.column("theory") == b.column("theory")
    assert a.column("mc_mean") != b.column("mc_mean")


def test_zero_replicates_consumes_no_randomness(monkeypatch):
    def boom(self):
        raise AssertionError("random stream used")
    monkeypatch.setattr(RngStream, "generator", boom)
    for spec in KINDS:
        if spec["kind"] in ("primal_gaussian", "cv", "loo", "bias_variance"):
            continue
        t = run_experiment(_cfg(**spec, replicates=0))
        assert all(r["replicates"] == 0 and math.isnan(r["mc_mean"]) for r in t.rows)


def test_ridge_risk_table_matches_theory():
    t = run_experiment(ExperimentConfig(kind="ridge_risk", n=1000, gamma=0.2, alpha=3, sigma=1, lam=0.3,
                                        replicates=10, seed=1))
    for q in ("mse", "residual"):
        row = t.select(quantity=q)[0]
        assert abs(row["mc_mean"] - row["theory"]) / row["theory"] < 0.02


def test_primal_orth_ratio_column():
    t = run_experiment(ExperimentConfig(kind="primal_orth", n=500, gamma=5, alpha=3, sigma=1, lam=1.5,
                                        ratios=(0.5,), replicates=0))
    assert t.value("theory", quantity="mse_ratio", ratio=0.5) > 1
    assert t.value("theory", quantity="mse_ratio_opt", ratio=0.5) == pytest.approx(1.04, abs=0.01)


def test_marginal_rows():
    t = run_experiment(ExperimentConfig(kind="marginal", gamma=0.7, replicates=0))
    assert t.value("theory", quantity="lam_star") == pytest.approx(2.4)
    assert t.value("theory", quantity="mse_star") == pytest.approx(1 - 1 / 2.4)


def test_orthogonal_family_required():
    with pytest.raises(ValueError, match="sketch_family"):
        run_experiment(_cfg(kind="primal_orth", gamma=2.0, sketch_family="gaussian"))


def test_default_grid():
    g = default_lam_grid(0.7)
    assert len(g) == 40 and g[0] == pytest.approx(0.7 / 30) and g[-1] == pytest.approx(21)
    assert default_lam_grid(None)[0] == pytest.approx(1e-3)


def test_dataset_cv(tmp_path):
    g = np.random.default_rng(0)
    X = g.standard_normal((100, 5))
    y = X @ np.ones(5) + g.standard_normal(100)
    path = tmp_path / "d.csv"
    path.write_text("a,b,c,d,e,y\n" + "\n".join(",".join(str(v) for v in r) for r in np.column_stack([X, y])))
    t = run_experiment(ExperimentConfig(kind="cv", dataset=str(path), response="y", replicates=3,
                                        test_fraction=0.2))
    assert t.value("theory", quantity="debias_factor") == 0.8
    assert t.value("replicates", quantity="test_err_delta") == 3
    t0 = run_experiment(ExperimentConfig(kind="cv", dataset=str(path), response="y", replicates=2))
    assert not t0.select(quantity="test_err_delta")


def test_fwht_matches_hadamard():
    from scipy.linalg import hadamard
    M = np.random.default_rng(0).standard_normal((16, 3))
    assert np.allclose(_fwht(M), hadamard(16) @ M)


@pytest.mark.parametrize("family", ["subsample", "srht", "haar", "gaussian"])
def test_apply_sketch_shapes(family):
    M = np.random.default_rng(0).standard_normal((64, 5))
    out = apply_sketch(family, 16, M, np.random.default_rng(1))
    assert out.shape == (16, 5)
    if family in ("subsample", "srht", "haar"):
        # n = 64 is a power of two, so the fast srht rows are exactly orthonormal
        L = apply_sketch(family, 64, np.eye(64), np.random.default_rng(2))
        assert np.allclose(L @ L.T, np.eye(64), atol=1e-10)


def test_timing_schema_and_repeats():
    specs = [SketchSpec("primal", "subsample", 0.25), SketchSpec("dual", "srht", 0.5)]
    t = timing_benchmark(200, 40, specs, 2, RngStream(0))
    assert t.columns == TIMING_COLUMNS
    assert [r["estimator"] for r in t.rows] == ["ridge", "primal_subsample", "dual_srht"]
    assert all(r["seconds_mean"] >= 0 for r in t.rows)
    with pytest.raises(ValueError, match="repeats"):
        timing_benchmark(20, 4, specs, 0, RngStream(0))
    with pytest.raises(ValueError):
        timing_benchmark(20, 4, [SketchSpec("full", "haar", 0.5)], 1, RngStream(0))


def test_timing_via_config():
    t = run_experiment(ExperimentConfig(kind="timing", n=400, p=40, ratios=(0.25,), sketch_family="subsample",
                                        repeats=1))
    assert t.columns == TIMING_COLUMNS and len(t.rows) == 3


# ---- CLI ----------------------------------------------------------------

def test_cli_theory_csv(tmp_path, capsys):
    assert cli.main(["theory", "--set", "gamma=0.2", "--set", "lam=0.3", "--seed", "9"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# tool=ridgesketch version=")
    meta, rows = cli.read_csv_table(out)
    assert meta["seed"] == "9" and len(meta["config_hash"]) == 16
    assert {r["quantity"] for r in rows} == {"bias2", "variance", "mse", "residual"}
    assert all(r["replicates"] == 0 for r in rows)


def test_cli_json_mirror(tmp_path):
    base = ["simulate", "--set", "n=80", "--set", "gamma=0.5", "--set", "replicates=2", "--seed", "3"]
    csv_path, json_path = tmp_path / "r.csv", tmp_path / "r.json"
    assert cli.main(base + ["--out", str(csv_path)]) == 0
    assert cli.main(base + ["--out", str(json_path), "--format", "json"]) == 0
    meta, rows = cli.read_csv_table(csv_path.read_text())
    doc = json.loads(json_path.read_text())
    assert doc["meta"]["config_hash"] == meta["config_hash"]
    assert [r["mc_mean"] for r in doc["rows"]] == [r["mc_mean"] for r in rows]


def test_cli_rerun_bit_identical(tmp_path):
    args = ["sketch-bench", "--set", "n=60", "--set", "gamma=2", "--set", "ratios=0.5", "--set", "replicates=2",
            "--set", "lam=1"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(args + ["--out", str(a), "--threads", "1"]) == 0
    assert cli.main(args + ["--out", str(b), "--threads", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("gamma = 0.5\nlam = 2\nseed = 1\n")
    assert cli.main(["theory", "--config", str(cfg), "--set", "lam=3", "--seed", "7"]) == 0
    meta, rows = cli.read_csv_table(capsys.readouterr().out)
    assert meta["seed"] == "7"
    assert {r["lam"] for r in rows} == {3.0} and {r["gamma"] for r in rows} == {0.5}


@pytest.mark.parametrize("argv", [
    ["theory", "--set", "gamma=-1"],
    ["theory", "--set", "nonsense=1"],
    ["cv", "--kind", "ridge_risk"],
    ["theory", "--config", "/nonexistent/file.cfg"],
    ["cv", "--dataset", "/nonexistent.csv", "--response", "y"],
    ["sketch-bench", "--set", "sketch_family=gaussian", "--set", "n=20"],
])
def test_cli_config_errors(argv, capsys):
    assert cli.main(argv) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error[config] ")


def test_cli_numeric_error(capsys, monkeypatch):
    import ridgesketch.experiments as ex

    def broken(*a, **k):
        raise ArithmeticError("no sign change of m^-1 on [1e-10, 1e12]")
    monkeypatch.setattr(ex, "dual_gaussian_bias", broken)
    assert cli.main(["sketch-bench", "--kind", "dual_gaussian", "--set", "replicates=0"]) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("error[numeric] ") and "\n" not in err


def test_cli_timing(capsys):
    assert cli.main(["timing", "--set", "n=200", "--set", "p=20", "--set", "sketch_family=subsample",
                     "--set", "repeats=1"]) == 0
    meta, rows = cli.read_csv_table(capsys.readouterr().out)
    assert list(rows[0]) == list(TIMING_COLUMNS)
