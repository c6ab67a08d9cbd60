"""Monte Carlo orchestration: theory next to simulation, one row per point and quantity.

Replicate ``r`` always draws from ``RngStream(seed, DESIGN_STREAM).child(r)``,
whatever the worker count, so tables do not depend on scheduling.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .config import ExperimentConfig
from .core_types import ModelParams, RngStream, SpectrumParams, generate_problem
from .cross_validation import kfold_cv, loo_shortcut, ridge_fit
from .datasets import cv_on_dataset, ingest_csv
from .det_equiv import solve_cp
from .estimators import (ORTHOGONAL_FAMILIES, SketchSpec, linear_risk, make_sketch, marginal_map,
                         ridge_map, sketched_map)
from .mp_theory import optimal_lambda_ridge, ridge_optimal_mse, ridge_risk_theory
from .sketch_theory import (dual_gaussian_bias, marginal_optimum, optimal_lambda_sketch,
                            primal_gaussian_bias, theory_mse, zeta_from_dp)

__version__ = "0.1.0"

RESULT_COLUMNS = ("experiment", "quantity", "gamma", "lam", "ratio", "n", "p",
                  "theory", "theory_se", "mc_mean", "mc_se", "replicates", "seed")
TIMING_COLUMNS = ("estimator", "n", "p", "ratio", "seconds_mean", "seconds_std")
DESIGN_STREAM = 1
PROXY_STREAM = 2
NAN = float("nan")


@dataclass
class ResultTable:
    columns: tuple
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict, repr=False)

    def column(self, name):
        return [r[name] for r in self.rows]

    def select(self, **match):
        return [r for r in self.rows if all(r[k] == v for k, v in match.items())]

    def value(self, column, **match):
        rows = self.select(**match)
        if len(rows) != 1:
            raise KeyError(f"{len(rows)} rows match {match}")
        return rows[0][column]

    def replicate_values(self, quantity, point=0):
        """Per-replicate values behind ``mc_mean`` for one point, in replicate order."""
        return np.asarray(self.samples.get((point, quantity), []), dtype=float)


def default_lam_grid(lam_star=None, points=40):
    """40 log-spaced penalties on [lam*/30, 30 lam*], or [1e-3, 1e2] without a model."""
    if lam_star is None or not np.isfinite(lam_star) or lam_star <= 0:
        return np.geomspace(1e-3, 1e2, points)
    return np.geomspace(lam_star / 30, 30 * lam_star, points)


def _map_replicates(fn, reps, workers):
    if reps == 0:
        return []
    if workers <= 1 or reps == 1:
        return [fn(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(reps)))


def _stat(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return NAN, NAN
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else NAN
    return float(v.mean()), se


class _Builder:
    """Collects theory values and per-replicate samples keyed by (point, quantity)."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.keys = []
        self.points = {}
        self.theory = {}
        self.theory_se = {}
        self.samples = {}

    def point(self, idx, gamma=NAN, lam=NAN, ratio=NAN, n=None, p=None):
        self.points[idx] = dict(gamma=float(gamma), lam=float(lam), ratio=float(ratio),
                                n=self.cfg.n if n is None else int(n),
                                p=self.cfg.n_features if p is None else int(p))

    def _key(self, idx, q):
        k = (idx, q)
        if k not in self.theory and k not in self.samples:
            self.keys.append(k)
        return k

    def set_theory(self, idx, q, value, se=NAN):
        k = self._key(idx, q)
        self.theory[k] = float(value)
        self.theory_se[k] = float(se)

    def add_replicates(self, results):
        """``results[r]`` maps (point, quantity) to that replicate's value."""
        for res in results:
            for k, v in res.items():
                self._key(*k)
                self.samples.setdefault(k, []).append(float(v))

    def table(self) -> ResultTable:
        rows = []
        for k in self.keys:
            idx, q = k
            mean, se = _stat(self.samples.get(k, []))
            rows.append(dict(experiment=self.cfg.kind, quantity=q, **self.points[idx],
                             theory=self.theory.get(k, NAN), theory_se=self.theory_se.get(k, NAN),
                             mc_mean=mean, mc_se=se, replicates=len(self.samples.get(k, [])),
                             seed=self.cfg.seed))
        samples = {k: list(v) for k, v in self.samples.items()}
        return ResultTable(RESULT_COLUMNS, rows, samples=samples)


def _model(cfg):
    return ModelParams.from_scales(cfg.alpha, cfg.sigma)


def _design_stream(cfg, r):
    return RngStream(cfg.seed, DESIGN_STREAM).child(r)


def _lam_points(cfg, lam_star):
    if cfg.lam_grid:
        return [float(l) for l in cfg.lam_grid]
    if cfg.lam is not None:
        return [float(cfg.lam)]
    if lam_star is None:
        raise ValueError("lam: required when alpha = 0 (no finite optimal penalty)")
    return [float(lam_star)]


def _lam_star(cfg, model, gamma=None):
    return optimal_lambda_ridge(cfg.aspect if gamma is None else gamma, model) if model.alpha2 > 0 else None


def _run_ridge_risk(cfg, b: _Builder):
    model = _model(cfg)
    n, p, g = cfg.n, cfg.n_features, cfg.aspect
    lams = _lam_points(cfg, _lam_star(cfg, model))
    for i, lam in enumerate(lams):
        b.point(i, g, lam)
        for q, v in ridge_risk_theory(SpectrumParams(g, lam), model).as_dict().items():
            b.set_theory(i, q, v)

    def rep(r):
        X = generate_problem(n, p, model, rng=_design_stream(cfg, r)).X
        out = {}
        for i, lam in enumerate(lams):
            rr = linear_risk(ridge_map(X, lam), X, model, residual=True)
            for q, v in rr.as_dict().items():
                out[(i, q)] = v
        return out

    b.add_replicates(_map_replicates(rep, cfg.replicates, cfg.worker_count))


def _run_bias_variance(cfg, b: _Builder):
    model = _model(cfg)
    if model.alpha2 <= 0:
        raise ValueError("alpha: must be positive for the bias-variance sweep")
    if cfg.gamma_grid:
        gammas = [float(x) for x in cfg.gamma_grid]
        pts = [(gm, optimal_lambda_ridge(gm, model) if cfg.lam is None else cfg.lam) for gm in gammas]
    else:
        pts = [(cfg.aspect, lam) for lam in _lam_points(cfg, _lam_star(cfg, model))]
    for i, (gm, lam) in enumerate(pts):
        b.point(i, gm, lam, p=max(1, int(round(gm * cfg.n))))
        rep_ = ridge_risk_theory(SpectrumParams(gm, lam), model)
        for q in ("bias2", "variance", "mse"):
            b.set_theory(i, q, getattr(rep_, q))

    def rep(r):
        out = {}
        for i, (gm, lam) in enumerate(pts):
            p = max(1, int(round(gm * cfg.n)))
            X = generate_problem(cfg.n, p, model, rng=_design_stream(cfg, r).child(i)).X
            rr = linear_risk(ridge_map(X, lam), X, model)
            out.update({(i, "bias2"): rr.bias2, (i, "variance"): rr.variance, (i, "mse"): rr.mse})
        return out

    b.add_replicates(_map_replicates(rep, cfg.replicates, cfg.worker_count))


def _run_representation(cfg, b: _Builder):
    """Identity covariance: trace and shrinkage functionals of the resolvent."""
    model = _model(cfg)
    n, p = cfg.n, cfg.n_features
    lams = _lam_points(cfg, _lam_star(cfg, model))
    fps = []
    for i, lam in enumerate(lams):
        fp = solve_cp(np.ones(p), n, lam)
        fps.append(fp)
        b.point(i, p / n, lam)
        b.set_theory(i, "c", fp.c)
        b.set_theory(i, "c_prime", fp.c_prime)
        b.set_theory(i, "resolvent_trace", 1 / (fp.c + lam))
        b.set_theory(i, "second_order_trace", (1 - fp.c_prime) / (fp.c + lam) ** 2)
        b.set_theory(i, "shrinkage", fp.c / (fp.c + lam))

    def rep(r):
        prob = generate_problem(n, p, model, rng=_design_stream(cfg, r))
        X, beta = prob.X, prob.beta
        e, V = np.linalg.eigh(X.T @ X / n)
        vb = V.T @ beta
        out = {}
        for i, lam in enumerate(lams):
            out[(i, "resolvent_trace")] = np.mean(1 / (e + lam))
            out[(i, "second_order_trace")] = np.mean((e + lam) ** -2.0)
            # beta' E[beta_hat | X, beta] / ||beta||^2 with beta_hat the noiseless ridge fit
            out[(i, "shrinkage")] = np.sum(vb ** 2 * e / (e + lam)) / np.sum(vb ** 2)
        return out

    b.add_replicates(_map_replicates(rep, cfg.replicates, cfg.worker_count))


_SKETCH_THEORY = {"primal_orth": ("primal", "primal_orth"), "dual_orth": ("dual", "dual_orth"),
                  "full": ("full", "full_orth")}


def _run_orth_sketch(cfg, b: _Builder):
    """Orthogonal primal, dual or full sketch against ridge, per sketch ratio.

    Ratios are m/n for primal and full sketches, d/p for dual sketches.
    """
    model = _model(cfg)
    if cfg.sketch_family not in ORTHOGONAL_FAMILIES:
        raise ValueError(f"sketch_family: {cfg.sketch_family!r} is not an orthogonal family "
                         f"{ORTHOGONAL_FAMILIES}")
    kind, tkind = _SKETCH_THEORY[cfg.kind]
    g = cfg.aspect
    lam_star = _lam_star(cfg, model)
    lam = float(cfg.lam if cfg.lam is not None else lam_star)
    ratios = [float(x) for x in (cfg.ratios or (0.5,))]
    ridge = ridge_risk_theory(SpectrumParams(g, lam), model)
    for i, ratio in enumerate(ratios):
        b.point(i, g, lam, ratio)
        tr = ratio if kind != "dual" else zeta_from_dp(g, ratio)
        th = theory_mse(tkind, g, tr, lam, model)
        for q, v in th.as_dict().items():
            b.set_theory(i, q, v)
        b.set_theory(i, "mse_ratio", th.mse / ridge.mse)
        if model.alpha2 > 0:
            lam_opt, m_opt = optimal_lambda_sketch(tkind, g, tr, model)
            b.set_theory(i, "lam_opt", lam_opt)
            b.set_theory(i, "mse_ratio_opt", m_opt / ridge_optimal_mse(g, model))
    b.point(len(ratios), g, lam)
    for q, v in ridge.as_dict().items():
        b.set_theory(len(ratios), "ridge_" + q, v)
    specs = [SketchSpec(kind, cfg.sketch_family, r) for r in ratios]

    def rep(r):
        st = _design_stream(cfg, r)
        X = generate_problem(cfg.n, cfg.n_features, model, rng=st).X
        base = linear_risk(ridge_map(X, lam), X, model)
        out = {(len(ratios), "ridge_" + q): v for q, v in base.as_dict().items()}
        for i, spec in enumerate(specs):
            rr = linear_risk(sketched_map(X, lam, spec, st.child(i)), X, model)
            for q, v in rr.as_dict().items():
                out[(i, q)] = v
            out[(i, "mse_ratio")] = rr.mse / base.mse
        return out

    b.add_replicates(_map_replicates(rep, cfg.replicates, cfg.worker_count))


def _run_marginal(cfg, b: _Builder):
    model = _model(cfg)
    g = cfg.aspect
    lam_m, mse_m = marginal_optimum(g, model)
    lams = _lam_points(cfg, lam_m if np.isfinite(lam_m) else None)
    for i, lam in enumerate(lams):
        b.point(i, g, lam)
        for q, v in theory_mse("marginal", g, 0.0, lam, model).as_dict().items():
            b.set_theory(i, q, v)
    k = len(lams)
    b.point(k, g, lam_m)
    b.set_theory(k, "lam_star", lam_m)
    b.set_theory(k, "mse_star", mse_m)
    if model.alpha2 > 0:
        b.set_theory(k, "mse_ratio_opt", mse_m / ridge_optimal_mse(g, model))

    def rep(r):
        X = generate_problem(cfg.n, cfg.n_features, model, rng=_design_stream(cfg, r)).X
        out = {}
        for i, lam in enumerate(lams):
            for q, v in linear_risk(marginal_map(X, lam), X, model).as_dict().items():
                out[(i, q)] = v
        return out

    b.add_replicates(_map_replicates(rep, cfg.replicates, cfg.worker_count))


def _run_dual_gaussian(cfg, b: _Builder):
    """Squared bias of the Gaussian dual sketch; ratios are d/p."""
    model = _model(cfg)
    g = cfg.aspect
    lam = float(cfg.lam if cfg.lam is not None else 1.0)
    ratios = [float(x) for x in (cfg.ratios or (0.5,))]
    for i, ratio in enumerate(ratios):
        b.point(i, g, lam, ratio)
        bias2, pt = dual_gaussian_bias(g, zeta_from_dp(g, ratio), lam, model.alpha2)
        b.set_theory(i, "bias2", bias2)
        b.set_theory(i, "root_residual", pt.residual)
    k = len(ratios)
    b.point(k, g, lam)
    b.set_theory(k, "ridge_bias2", ridge_risk_theory(SpectrumParams(g, lam), model).bias2)

    def rep(r):
        st = _design_stream(cfg, r)
        X = generate_problem(cfg.n, cfg.n_features, model, rng=st).X
        out = {}
        for i, ratio in enumerate(ratios):
            T = sketched_map(X, lam, SketchSpec("dual", "gaussian", ratio), st.child(i))
            out[(i, "bias2")] = linear_risk(T, X, model).bias2
        return out

    b.add_replicates(_map_replicates(rep, cfg.replicates, cfg.worker_count))


def _run_primal_gaussian(cfg, b: _Builder):
    """Squared bias of the Gaussian primal sketch; ratios are m/n.

    The theory column is itself a finite-matrix estimate, so it carries a
    standard error and draws from its own stream even when replicates = 0.
    """
    model = _model(cfg)
    g = cfg.aspect
    lam = float(cfg.lam if cfg.lam is not None else 1.0)
    ratios = [float(x) for x in (cfg.ratios or (0.5,))]
    proxy_reps = max(cfg.replicates, 10)
    for i, xi in enumerate(ratios):
        b.point(i, g, lam, xi)
        est, se = primal_gaussian_bias(g, xi, lam, model.alpha2, cfg.proxy_n, proxy_reps,
                                       RngStream(cfg.seed, PROXY_STREAM).child(i))
        b.set_theory(i, "bias2", est, se)

    def rep(r):
        st = _design_stream(cfg, r)
        X = generate_problem(cfg.n, cfg.n_features, model, rng=st).X
        out = {}
        for i, xi in enumerate(ratios):
            T = sketched_map(X, lam, SketchSpec("primal", "gaussian", xi), st.child(i))
            out[(i, "bias2")] = linear_risk(T, X, model).bias2
        return out

    b.add_replicates(_map_replicates(rep, cfg.replicates, cfg.worker_count))


def _synthetic_cv_replicate(cfg, model, grid, r, loo=False):
    st = _design_stream(cfg, r)
    prob = generate_problem(cfg.n, cfg.n_features, model, rng=st)
    Y = prob.X @ prob.beta + prob.sigma * st.child(0).generator().standard_normal(cfg.n)

    # exact out-of-sample error for Sigma = I: sigma^2 + ||beta_hat - beta||^2
    def test_err(lam):
        return model.sigma2 + float(np.sum((ridge_fit(prob.X, Y, lam) - prob.beta) ** 2))

    if loo:
        _, lam_loo = loo_shortcut(prob.X, Y, grid)
        return {(0, "lam_loo"): lam_loo, (0, "test_err_loo"): test_err(lam_loo)}
    rep = kfold_cv(prob.X, Y, grid, cfg.folds, st.child(1))
    e_cv, e_db = test_err(rep.lam_cv), test_err(rep.lam_debiased)
    return {(0, "lam_cv"): rep.lam_cv, (0, "lam_debiased"): rep.lam_debiased,
            (0, "test_err_cv"): e_cv, (0, "test_err_debiased"): e_db,
            (0, "test_err_delta"): e_db - e_cv, (0, "boundary_argmin"): float(rep.boundary_argmin)}


def _cv_grid(cfg, lam_star):
    return np.asarray(cfg.lam_grid, dtype=float) if cfg.lam_grid else default_lam_grid(lam_star)


def _run_cv(cfg, b: _Builder, loo=False):
    if cfg.dataset:
        return _run_cv_dataset(cfg, b)
    model = _model(cfg)
    g = cfg.aspect
    lam_star = _lam_star(cfg, model)
    grid = _cv_grid(cfg, lam_star)
    b.point(0, g, lam_star if lam_star is not None else NAN)
    factor = (cfg.folds - 1) / cfg.folds
    b.set_theory(0, "debias_factor", 1.0 if loo else factor)
    if lam_star is not None:
        best = ridge_risk_theory(SpectrumParams(g, lam_star), model).mse + model.sigma2
        if loo:
            b.set_theory(0, "lam_loo", lam_star)
            b.set_theory(0, "test_err_loo", best)
        else:
            # CV tunes for the training-fold aspect ratio gamma K/(K-1)
            b.set_theory(0, "lam_cv", lam_star / factor)
            b.set_theory(0, "lam_debiased", lam_star)
            b.set_theory(0, "test_err_debiased", best)
    fn = lambda r: _synthetic_cv_replicate(cfg, model, grid, r, loo=loo)
    b.add_replicates(_map_replicates(fn, cfg.replicates, cfg.worker_count))


def _run_cv_dataset(cfg, b: _Builder):
    if not cfg.response:
        raise ValueError("response: required when dataset is set")
    ds = ingest_csv(cfg.dataset, cfg.response, standardize=cfg.standardize)
    grid = _cv_grid(cfg, None)
    seeds = [cfg.seed + s for s in range(max(cfg.replicates, 1))]
    res = cv_on_dataset(ds, cfg.folds, grid, cfg.test_fraction, seeds)
    n, p = ds.X.shape
    b.point(0, p / n, NAN, n=n, p=p)
    b.set_theory(0, "debias_factor", res.reports[0].debias_factor)
    out = [{(0, "lam_cv"): rep.lam_cv, (0, "lam_debiased"): rep.lam_debiased} for rep in res.reports]
    if res.test_err_cv is not None:
        for d, ec, ed in zip(out, res.test_err_cv, res.test_err_debiased):
            d.update({(0, "test_err_cv"): ec, (0, "test_err_debiased"): ed,
                      (0, "test_err_delta"): ed - ec})
    b.add_replicates(out)


_RUNNERS = {
    "ridge_risk": _run_ridge_risk,
    "bias_variance": _run_bias_variance,
    "representation": _run_representation,
    "primal_orth": _run_orth_sketch,
    "dual_orth": _run_orth_sketch,
    "full": _run_orth_sketch,
    "marginal": _run_marginal,
    "dual_gaussian": _run_dual_gaussian,
    "primal_gaussian": _run_primal_gaussian,
    "cv": _run_cv,
    "loo": lambda cfg, b: _run_cv(cfg, b, loo=True),
}


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    """Run ``cfg.kind`` and return its table (see ``RESULT_COLUMNS``)."""
    if cfg.kind == "timing":
        table = timing_benchmark(cfg.n, cfg.n_features, _timing_specs(cfg), cfg.repeats,
                                 RngStream(cfg.seed, DESIGN_STREAM), lam=cfg.lam or 1.0)
    else:
        b = _Builder(cfg)
        _RUNNERS[cfg.kind](cfg, b)
        table = b.table()
    table.meta = {"tool": "ridgesketch", "version": __version__, "kind": cfg.kind,
                  "config_hash": cfg.config_hash(), "seed": cfg.seed}
    return table


# ---- timing -------------------------------------------------------------

def _timing_specs(cfg):
    ratios = cfg.ratios or (0.25,)
    fam = cfg.sketch_family
    specs = [SketchSpec("primal", fam, r) for r in ratios]
    specs += [SketchSpec("dual", fam, r) for r in ratios]
    return specs


def _fwht(A):
    """Unnormalized Walsh-Hadamard transform along axis 0 (length a power of two)."""
    A = A.copy()
    N = A.shape[0]
    h = 1
    while h < N:
        A = A.reshape(N // (2 * h), 2, h, -1)
        top, bot = A[:, 0].copy(), A[:, 1]
        A[:, 0] += bot
        A[:, 1] = top - bot
        A = A.reshape(N, -1)
        h *= 2
    return A


def apply_sketch(family, rows, M, gen):
    """``L @ M`` for a fresh sketch L (rows x M.shape[0]) without forming L when avoidable.

    SRHT here skips the re-orthonormalization used by ``make_sketch``; its rows
    are orthonormal only when the row count of M is a power of two.
    """
    n = M.shape[0]
    if family == "subsample":
        return M[gen.choice(n, size=rows, replace=False)]
    if family == "srht":
        N = 1 << max(0, (n - 1).bit_length())
        padded = np.zeros((N,) + M.shape[1:])
        padded[:n] = M * gen.choice([-1.0, 1.0], size=n)[:, None]
        idx = gen.choice(N, size=rows, replace=False)
        return _fwht(padded)[idx] / np.sqrt(N)
    seed = int(gen.integers(2 ** 63))
    return make_sketch(family, rows, n, RngStream(seed)) @ M


def _fit_ridge(X, Y, lam):
    n, p = X.shape
    if p <= n:
        return linalg.cho_solve(linalg.cho_factor(X.T @ X / n + lam * np.eye(p)), X.T @ Y / n)
    return X.T @ linalg.cho_solve(linalg.cho_factor(X @ X.T / n + lam * np.eye(n)), Y) / n


def _fit_primal(X, Y, lam, m, family, gen):
    n, p = X.shape
    P = apply_sketch(family, m, X, gen)
    rhs = X.T @ Y / n
    if m < p:
        inner = linalg.cho_solve(linalg.cho_factor(P @ P.T + n * lam * np.eye(m)), P @ rhs)
        return (rhs - P.T @ inner) / lam
    return linalg.cho_solve(linalg.cho_factor(P.T @ P / n + lam * np.eye(p)), rhs)


def _fit_dual(X, Y, lam, d, family, gen):
    n, p = X.shape
    Q = apply_sketch(family, d, X.T, gen).T  # X R with R = L', n x d
    # (Q Q'/n + lam I_n)^{-1} Y through the d x d Woodbury form
    inner = linalg.cho_solve(linalg.cho_factor(Q.T @ Q + n * lam * np.eye(d)), Q.T @ Y)
    return X.T @ ((Y - Q @ inner) / lam) / n


def timing_benchmark(n, p, specs, repeats, rng: RngStream, lam=1.0) -> ResultTable:
    """Wall-clock seconds per fit of ridge and each primal/dual sketch in ``specs``.

    Timings are reported, not asserted; the cost of drawing and applying the
    sketch is included.
    """
    repeats = int(repeats)
    if repeats < 1:
        raise ValueError(f"repeats: must be >= 1, got {repeats}")
    for s in specs:
        if s.kind not in ("primal", "dual"):
            raise ValueError(f"timing supports primal and dual sketches, got {s.kind!r}")
    gen = rng.generator()
    X = gen.standard_normal((n, p))
    Y = gen.standard_normal(n)
    jobs = [("ridge", NAN, lambda g: _fit_ridge(X, Y, lam))]
    for s in specs:
        size = s.size(n, p)
        if s.kind == "primal":
            fn = lambda g, m=size, f=s.family: _fit_primal(X, Y, lam, m, f, g)
        else:
            fn = lambda g, d=size, f=s.family: _fit_dual(X, Y, lam, d, f, g)
        jobs.append((f"{s.kind}_{s.family}", s.ratio, fn))
    rows = []
    for name, ratio, fn in jobs:
        secs = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn(gen)
            secs.append(time.perf_counter() - t0)
        rows.append(dict(estimator=name, n=n, p=p, ratio=ratio, seconds_mean=float(np.mean(secs)),
                         seconds_std=float(np.std(secs, ddof=1)) if repeats > 1 else 0.0))
    return ResultTable(TIMING_COLUMNS, rows)
