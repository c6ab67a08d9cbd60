"""Marchenko-Pastur resolvent moments and the limiting risk of ridge regression.

``F_gamma`` denotes the limiting spectral law of X'X/n for an n x p design with
i.i.d. standardized entries and p/n -> gamma.  For gamma > 1 it carries an
atom of mass 1 - 1/gamma at zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .core_types import ModelParams, SpectrumParams
from .estimators import RiskReport


@dataclass(frozen=True)
class ThetaValues:
    theta1: float
    theta2: float
    at: SpectrumParams


@dataclass(frozen=True)
class BarThetaValues:
    bar1: float
    bar2: float
    zeta: float
    lam: float


def mp_support(gamma):
    """Edges of the continuous part of F_gamma."""
    r = np.sqrt(gamma)
    return (1 - r) ** 2, (1 + r) ** 2


def mp_stieltjes(gamma, z):
    """Stieltjes transform m(z) = int 1/(x - z) dF_gamma(x).

    Uses ``((z+g-1) + s) / (-2 z g)`` with ``s^2 = (z+g-1)^2 - 4 z g``.  On the
    negative real axis ``s`` is the principal square root; elsewhere ``s`` is
    continued analytically off the support (``s = -(z-g-1) sqrt(1 - 4g/(z-g-1)^2)``),
    so Im m > 0 whenever Im z > 0.
    """
    gamma = float(gamma)
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    z = np.asarray(z, dtype=complex)
    lo, hi = mp_support(gamma)
    on_real = np.abs(z.imag) == 0
    inside = on_real & (z.real >= lo) & (z.real <= hi)
    if gamma >= 1:
        inside |= on_real & (z.real == 0)
    if np.any(inside) or np.any(z == 0):
        raise ValueError(f"z lies in the support [{lo:.6g}, {hi:.6g}] of the MP law")
    w = z - gamma - 1
    s = -w * np.sqrt(1 - 4 * gamma / w ** 2)
    a = -(z + gamma - 1)
    num, conj = a - s, a + s
    # the two roots multiply to 1/(g z); divide by the larger of the two numerators
    m = np.where(np.abs(num) >= np.abs(conj), num / (2 * gamma * z), 2 / conj)
    return m if m.ndim else complex(m)


def _theta_stable(gamma, lam):
    """(theta1, theta2) from the closed forms, choosing the cancellation-free variant."""
    S = np.sqrt((lam + gamma + 1) ** 2 - 4 * gamma)
    d = lam + 1 - gamma
    if d >= 0:
        # conjugate form: (S - (g-1-lam)) (S + (g-1-lam)) = 4 g lam
        t1 = 2 / (S + d)
        t2 = 2 * (S + lam + gamma + 1) / (S * (S + d) ** 2)
    else:
        t1 = (S - d) / (2 * gamma * lam)
        t2 = (gamma - 1 + S - lam * (lam + gamma + 1) / S) / (2 * gamma * lam ** 2)
    return t1, t2


def theta2_printed(gamma, lam):
    """theta2 exactly as the term-by-term closed form for the isotropic case reads."""
    rg = np.sqrt(gamma)
    q = np.sqrt((rg + (1 + lam) / rg) ** 2 - 4)
    return (-1 / (gamma * lam ** 2) + (gamma + 1) / (2 * gamma * lam ** 2)
            - (1 / (2 * rg)) * ((lam + 1) / gamma + 1) / (lam * q)
            + (1 / (2 * rg)) * q / lam ** 2)


def theta1_z2_route(gamma, lam):
    """theta1 through the auxiliary root z2 of the contour-integral derivation."""
    rg = np.sqrt(gamma)
    u = rg + (1 + lam) / rg
    z2 = -0.5 * (u + np.sqrt(u ** 2 - 4))
    return -0.5 * (2 * (1 + lam) / (lam * gamma) + 2 * z2 / (rg * lam))


def theta(gamma, lam) -> ThetaValues:
    """theta_i = int (x + lam)^{-i} dF_gamma(x) for i = 1, 2.

    theta1 = m_gamma(-lam); theta2 = -d theta1 / d lam.  Both are evaluated in a
    rationalized form that stays accurate for lam down to ~1e-10 and up to ~1e8.
    """
    at = SpectrumParams(float(gamma), float(lam))
    t1, t2 = (float(v) for v in _theta_stable(float(gamma), float(lam)))
    if not (t1 > 0 and t2 > 0):
        raise ArithmeticError(f"non-positive resolvent moment at gamma={gamma}, lam={lam}")
    return ThetaValues(t1, t2, at)


def theta_bar(zeta, lam) -> BarThetaValues:
    """Moments of the companion law (1 - zeta) delta_0 + zeta F_zeta."""
    if zeta > 1:
        # no atom: the law is zeta * F_{1/zeta}, which avoids cancelling two 1/lam^2 terms
        th = theta(1 / zeta, lam / zeta)
        return BarThetaValues(th.theta1 / zeta, th.theta2 / zeta ** 2, float(zeta), float(lam))
    th = theta(zeta, lam)
    bar1 = (1 - zeta) / lam + zeta * th.theta1
    bar2 = (1 - zeta) / lam ** 2 + zeta * th.theta2
    return BarThetaValues(bar1, bar2, float(zeta), float(lam))


def mp_density(x, gamma):
    """Density of the continuous part of F_gamma (mass min(1, 1/gamma))."""
    x = np.asarray(x, dtype=float)
    lo, hi = mp_support(gamma)
    inside = (x > lo) & (x < hi)
    out = np.zeros_like(x)
    xi = x[inside]
    out[inside] = np.sqrt((hi - xi) * (xi - lo)) / (2 * np.pi * gamma * xi)
    return out


def mp_cdf(x, gamma):
    """CDF of F_gamma, including the atom at zero when gamma > 1."""
    lo, hi = mp_support(gamma)
    atom = max(0.0, 1 - 1 / gamma)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    for i, v in enumerate(xs):
        if v < 0:
            out[i] = 0.0
        elif v <= lo:
            out[i] = atom
        elif v >= hi:
            out[i] = 1.0
        else:
            val, _ = integrate.quad(lambda t: mp_density(t, gamma), lo, v, limit=200)
            out[i] = atom + val
    return out if np.ndim(x) else float(out[0])


def resolvent_moment_quad(gamma, lam, power):
    """int (x + lam)^{-power} dF_gamma(x) by direct quadrature; an independent check."""
    lo, hi = mp_support(gamma)
    atom = max(0.0, 1 - 1 / gamma)
    val, _ = integrate.quad(lambda t: mp_density(t, gamma) * (t + lam) ** (-power),
                            lo, hi, limit=400, epsabs=1e-13, epsrel=1e-12)
    return atom * lam ** (-power) + val


def spectrum_theta(eigenvalues, lam, power=1):
    """Resolvent moment of an explicit discrete spectrum, mean of (x + lam)^{-power}."""
    ev = np.asarray(eigenvalues, dtype=float)
    return float(np.mean((ev + lam) ** (-float(power))))


def ridge_risk_theory(params: SpectrumParams, model: ModelParams) -> RiskReport:
    """Limiting bias, variance, MSE and residual of ridge at (gamma, lam)."""
    g, lam = params.gamma, params.lam
    th = theta(g, lam)
    t1, t2 = th.theta1, th.theta2
    a2, s2 = model.alpha2, model.sigma2
    bias2 = a2 * lam ** 2 * t2
    variance = g * s2 * (t1 - lam * t2)
    residual = a2 * lam ** 2 * (t1 - lam * t2) + s2 * (1 - g + g * lam ** 2 * t2)
    return RiskReport.from_parts(bias2, max(variance, 0.0), residual)


def optimal_lambda_ridge(gamma, model: ModelParams) -> float:
    if model.alpha2 <= 0:
        raise ValueError("alpha2 = 0: the optimal penalty is infinite (zero estimator)")
    return gamma * model.sigma2 / model.alpha2


def ridge_optimal_mse(gamma, model: ModelParams) -> float:
    lam = optimal_lambda_ridge(gamma, model)
    return ridge_risk_theory(SpectrumParams(gamma, lam), model).mse


def minimize_lambda(f, lo, hi, tol=1e-10, log_scale=True):
    """Minimize a unimodal function of lam on [lo, hi] (bounded Brent search, log scale)."""
    if log_scale:
        res = optimize.minimize_scalar(lambda u: f(np.exp(u)), bracket=None,
                                       bounds=(np.log(lo), np.log(hi)), method="bounded",
                                       options={"xatol": tol})
        return float(np.exp(res.x)), float(res.fun)
    res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": tol})
    return float(res.x), float(res.fun)


def bias_variance_curve(gamma, model: ModelParams, lam_grid):
    """Per-lambda risk reports; checks that bias2 rises and variance falls."""
    lam_grid = np.asarray(lam_grid, dtype=float)
    if np.any(np.diff(lam_grid) <= 0):
        raise ValueError("lam_grid must be strictly increasing")
    reports = [ridge_risk_theory(SpectrumParams(gamma, float(lam)), model) for lam in lam_grid]
    b = np.array([r.bias2 for r in reports])
    v = np.array([r.variance for r in reports])
    if np.any(np.diff(b) < -1e-12 * max(1.0, b.max())) or np.any(np.diff(v) > 1e-12 * max(1.0, v.max())):
        raise ArithmeticError("bias/variance monotonicity violated on the grid")
    return reports
