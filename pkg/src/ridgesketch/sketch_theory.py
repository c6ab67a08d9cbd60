"""Limiting risk of sketched ridge regression.

Conventions: ``xi = m/n`` for primal and full sketches, ``zeta = d/n`` for
dual sketches (use :func:`zeta_from_dp` to convert a d/p ratio).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .core_types import ModelParams, RngStream, SpectrumParams
from .estimators import RiskReport
from .mp_theory import minimize_lambda, optimal_lambda_ridge, ridge_risk_theory, theta, theta_bar

THEORY_KINDS = ("ridge", "primal_orth", "dual_orth", "full_orth", "marginal",
                "dual_gaussian_bias", "primal_gaussian_bias")


@dataclass(frozen=True)
class SketchTheoryQuery:
    gamma: float
    ratio: float
    lam: float
    model: ModelParams
    kind: str

    def __post_init__(self):
        if self.kind not in THEORY_KINDS:
            raise ValueError(f"unknown theory kind {self.kind!r}")
        if not self.gamma > 0 or not self.lam > 0:
            raise ValueError("gamma and lam must be positive")
        if self.kind == "dual_orth" and not 0 < self.ratio <= self.gamma:
            raise ValueError(f"dual sketch needs zeta = d/n in (0, gamma], got {self.ratio}")
        if self.kind in ("primal_orth", "full_orth") and not 0 < self.ratio <= 1:
            raise ValueError(f"sketch ratio xi = m/n must lie in (0, 1], got {self.ratio}")


@dataclass(frozen=True)
class FreeConvolutionPoint:
    m0: float
    m0_prime: float
    bracket: tuple
    residual: float


def zeta_from_dp(gamma, d_over_p):
    return float(gamma) * float(d_over_p)


def primal_orth_mse(gamma, xi, lam, model: ModelParams) -> RiskReport:
    """Orthogonal primal sketch with m/n -> xi, using theta_i(gamma/xi, lam/xi)."""
    if xi <= 0:
        raise ValueError("xi = 0 is marginal regression; use marginal_mse")
    if xi > 1:
        raise ValueError("xi must not exceed 1")
    th = theta(gamma / xi, lam / xi)
    t1, t2 = th.theta1, th.theta2
    shift = lam + xi - 1
    bias2 = model.alpha2 * (shift ** 2 + gamma * (1 - xi)) * t2 / xi ** 2
    variance = gamma * model.sigma2 * (xi * t1 - shift * t2) / xi ** 2
    return RiskReport.from_parts(bias2, variance)


def dual_orth_mse(gamma, zeta, lam, model: ModelParams) -> RiskReport:
    """Orthogonal dual sketch with d/n -> zeta in (0, gamma]."""
    if not 0 < zeta <= gamma * (1 + 1e-12):
        raise ValueError(f"zeta = d/n must lie in (0, gamma], got {zeta}")
    tb = theta_bar(zeta, lam)
    b1, b2 = tb.bar1, tb.bar2
    bias2 = model.alpha2 / gamma * (gamma - 1 + (lam - gamma + zeta) ** 2 * b2 + (gamma - zeta) * b1 ** 2)
    variance = model.sigma2 * (b1 - (lam + zeta - gamma) * b2)
    return RiskReport.from_parts(bias2, variance)


def marginal_mse(gamma, lam, model: ModelParams) -> RiskReport:
    """Scaled marginal regression X'Y/(n lam), the vanishing-sketch limit."""
    bias2 = model.alpha2 * ((lam - 1) ** 2 + gamma) / lam ** 2
    variance = model.sigma2 * gamma / lam ** 2
    return RiskReport.from_parts(bias2, variance)


def marginal_optimum(gamma, model: ModelParams):
    """Closed-form minimizer and minimum of the marginal-regression MSE."""
    a2, s2 = model.alpha2, model.sigma2
    if a2 <= 0:
        return np.inf, 0.0
    lam_star = gamma * s2 / a2 + 1 + gamma
    mse_star = a2 * (1 - a2 / (a2 * (1 + gamma) + gamma * s2))
    return float(lam_star), float(mse_star)


def full_sketch_mse(gamma, xi, lam, model: ModelParams) -> RiskReport:
    """Full orthogonal sketch: ridge on (LX, LY) behaves like ridge at (gamma/xi, lam/xi)."""
    if not 0 < xi <= 1:
        raise ValueError("xi must lie in (0, 1]")
    th = theta(gamma / xi, lam / xi)
    t1, t2 = th.theta1, th.theta2
    bias2 = model.alpha2 * lam ** 2 * t2 / xi ** 2
    variance = model.sigma2 * gamma * (t1 / xi - lam * t2 / xi ** 2)
    return RiskReport.from_parts(bias2, variance)


def full_sketch_optimal_lambda(gamma, model: ModelParams) -> float:
    return optimal_lambda_ridge(gamma, model)


def _dual_gauss_inverse(y, gamma, zeta, lam):
    """Inverse Stieltjes transform m^{-1}(y) of the free convolution, real y > 0."""
    root = np.sqrt((gamma - 1) ** 2 + 4 * lam * y)
    return 1 / (1 + y / zeta) - (gamma + 1 - root) / (2 * y)


def _dual_gauss_inverse_prime(y, gamma, zeta, lam):
    root = np.sqrt((gamma - 1) ** 2 + 4 * lam * y)
    first = -1 / (zeta * (1 + y / zeta) ** 2)
    # d/dy [ (g + 1 - root) / (2y) ]
    second = (-(2 * lam / root) * y - (gamma + 1 - root)) / (2 * y ** 2)
    return first - second


def dual_gaussian_bias(gamma, zeta, lam, alpha2, y_min=1e-10, y_max=1e12):
    """Limiting squared bias of the Gaussian dual sketch, R with N(0, 1/d) entries.

    ``zeta`` is d/n, the aspect ratio of the sketch Wishart factor.  m(0) is the
    root of m^{-1} on (0, inf), located by doubling y from ``y_min`` until the
    first sign change and refined by bisection; m'(0) = 1 / (m^{-1})'(m(0)).
    Returns ``(bias2, FreeConvolutionPoint)``.
    """
    if min(gamma, zeta, lam) <= 0 or alpha2 < 0:
        raise ValueError("gamma, zeta, lam must be positive and alpha2 nonnegative")
    f = lambda y: _dual_gauss_inverse(y, gamma, zeta, lam)
    lo = y_min
    if not f(lo) < 0:
        raise ArithmeticError(f"m^-1 is not negative at the lower bracket end {lo:g}")
    hi = 2 * lo
    while not f(hi) > 0:
        lo, hi = hi, 2 * hi
        if hi > y_max:
            raise ArithmeticError(f"no sign change of m^-1 on [{y_min:g}, {y_max:g}]")
    m0 = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    # m^-1 must increase from the bracket start up to the root for it to be m(0)
    grid = np.linspace(lo, m0, 65)
    if np.any(np.diff(f(grid)) <= 0):
        raise ArithmeticError(f"m^-1 is not monotone on bracket [{lo:g}, {hi:g}]")
    m0_prime = 1 / _dual_gauss_inverse_prime(m0, gamma, zeta, lam)
    bias2 = alpha2 + alpha2 / gamma * (m0_prime - 2 * m0)
    point = FreeConvolutionPoint(float(m0), float(m0_prime), (float(lo), float(hi)), float(abs(f(m0))))
    return float(bias2), point


def primal_gaussian_bias(gamma, xi, lam, alpha2, proxy_n, reps, rng: RngStream):
    """Squared bias of the Gaussian primal sketch via a finite-matrix free proxy.

    a ~ W/d with W Wishart(I_N, d), b ~ (lam/gamma) (G/p)^{-1} with G Wishart(I_N, p),
    d = xi N and p = gamma N.  The bias

        alpha2 + alpha2/gamma [tau((a+b)^{-1} b (a+b)^{-1} b^{-1}) - 2 tau((a+b)^{-1})]

    is averaged over ``reps`` draws, tau = tr / N.  Returns ``(estimate, standard_error)``.
    """
    N = int(proxy_n)
    if N < 200:
        raise ValueError("proxy_n must be at least 200")
    d = max(1, int(round(xi * N)))
    p = int(round(gamma * N))
    if p < N:
        raise ValueError(
            f"G = Wishart(I_{N}, {p}) is singular (p < N); the free-variable formula needs "
            "gamma >= 1 so that (G/p)^{-1} exists")
    vals = np.empty(int(reps))
    for r in range(int(reps)):
        gen = rng.child(r).generator()
        Z = gen.standard_normal((N, d))
        a = Z @ Z.T / d
        Y = gen.standard_normal((N, p))
        g_over_p = Y @ Y.T / p
        b_inv = (gamma / lam) * g_over_p
        b = np.linalg.inv(b_inv)
        b = 0.5 * (b + b.T)
        s_inv = np.linalg.inv(a + b)
        t_first = np.trace(s_inv @ b @ s_inv @ b_inv) / N
        t_second = np.trace(s_inv) / N
        vals[r] = alpha2 + alpha2 / gamma * (t_first - 2 * t_second)
    se = vals.std(ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else np.inf
    return float(vals.mean()), float(se)


def theory_mse(kind, gamma, ratio, lam, model: ModelParams) -> RiskReport:
    """Dispatch to the theory MSE of ``kind`` (ratio is xi, or zeta = d/n for dual)."""
    if kind == "ridge":
        return ridge_risk_theory(SpectrumParams(gamma, lam), model)
    if kind == "primal_orth":
        return primal_orth_mse(gamma, ratio, lam, model)
    if kind == "dual_orth":
        return dual_orth_mse(gamma, ratio, lam, model)
    if kind == "full_orth":
        return full_sketch_mse(gamma, ratio, lam, model)
    if kind == "marginal":
        return marginal_mse(gamma, lam, model)
    raise ValueError(f"no closed-form MSE for kind {kind!r}")


def lambda_upper(gamma, model: ModelParams) -> float:
    snr_term = gamma * model.sigma2 / model.alpha2 if model.alpha2 > 0 else 1e6
    return 10 * (1 + snr_term + gamma)


def optimal_lambda_sketch(kind, gamma, ratio, model: ModelParams, grid_points=200):
    """Numerically optimal lam for a sketched estimator.

    Searches [1e-6, 10 (1 + gamma sigma2/alpha2 + gamma)] with a bounded scalar
    minimizer in log(lam) after checking that the MSE is unimodal on a grid.
    """
    lo, hi = 1e-6, lambda_upper(gamma, model)
    f = lambda lam: theory_mse(kind, gamma, ratio, lam, model).mse
    grid = np.geomspace(lo, hi, grid_points)
    vals = np.array([f(l) for l in grid])
    steps = np.sign(np.diff(vals))
    steps = steps[steps != 0]
    if np.count_nonzero(np.diff(steps)) > 1:
        raise ArithmeticError(f"MSE of {kind} is not unimodal in lam on [{lo:g}, {hi:g}]")
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid_points - 1)]
    return minimize_lambda(f, a, b, tol=1e-12)
