"""Deterministic equivalents for the ridge resolvent.

For a design X = U Sigma^{1/2} with n rows,

    (Sigma_hat + lam I)^{-1}  ~  (c Sigma + lam I)^{-1},

where c in (0, 1) solves  1 - c = (c/n) tr[Sigma (c Sigma + lam I)^{-1}].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_types import RngStream, sqrt_psd
from .estimators import ridge_map

BISECT_TOL = 1e-13
_C_LO, _C_HI = 1e-12, 1 - 1e-12


@dataclass(frozen=True)
class FixedPointResult:
    c: float
    c_prime: float
    iterations: int
    residual: float


@dataclass(frozen=True)
class RepresentationPair:
    A: np.ndarray
    B: np.ndarray
    fixed_point: FixedPointResult


def _spectrum(spectrum):
    ev = np.asarray(spectrum, dtype=float).ravel()
    if ev.size == 0 or np.any(ev <= 0):
        raise ValueError("spectrum must be a non-empty list of positive eigenvalues")
    return ev


def _fp_gap(c, ev, n, lam):
    # decreasing in c: positive at c -> 0, negative at c -> 1
    return 1 - c - c / n * np.sum(ev / (c * ev + lam))


def solve_cp(spectrum, n, lam) -> FixedPointResult:
    """Solve the fixed-point equation by bisection on (0, 1).

    ``c_prime`` is dc/dz at z = -lam, so dc/dlam = -c_prime.
    """
    ev = _spectrum(spectrum)
    n = int(n)
    if lam <= 0:
        raise ValueError("lam must be positive")
    lo, hi = _C_LO, _C_HI
    g_lo, g_hi = _fp_gap(lo, ev, n, lam), _fp_gap(hi, ev, n, lam)
    if g_lo > 0 and g_hi >= 0:
        # root within 1e-12 of 1 (lam dominates the spectrum): the map
        # c -> 1 - (c/n) sum ev/(c ev + lam) is then a strong contraction
        c, it = 1.0, 0
        while it < 200:
            nxt = 1 - c / n * np.sum(ev / (c * ev + lam))
            it += 1
            if nxt == c:
                break
            c = nxt
        return FixedPointResult(float(c), float(cp_derivative(c, ev, n, lam)), it,
                                float(abs(_fp_gap(c, ev, n, lam))))
    if not (g_lo > 0 > g_hi):
        raise ArithmeticError(
            f"fixed point not bracketed on [{lo}, {hi}]: gaps {g_lo:.3e}, {g_hi:.3e}")
    it = 0
    while hi - lo > BISECT_TOL and it < 200:
        mid = 0.5 * (lo + hi)
        if _fp_gap(mid, ev, n, lam) > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    c = 0.5 * (lo + hi)
    residual = abs(_fp_gap(c, ev, n, lam))
    c_prime = cp_derivative(c, ev, n, lam)
    return FixedPointResult(float(c), float(c_prime), it, float(residual))


def cp_derivative(c, spectrum, n, lam):
    """dc/dz at z = -lam:  g E[c T/(cT - z)^2] / (-1 + g z E[T/(cT - z)^2])."""
    ev = _spectrum(spectrum)
    gp = ev.size / n
    z = -lam
    e2 = np.mean(ev / (c * ev - z) ** 2)
    return gp * c * e2 / (-1 + gp * z * e2)


def _scalar_maps(ev, fp, lam):
    c, cp = fp.c, fp.c_prime
    a = (c + lam * cp) * ev / (c * ev + lam) ** 2
    b = c * ev / (c * ev + lam)
    return a, b


def representation_pair(spectrum, n, lam, eigvecs=None) -> RepresentationPair:
    """Matrices A(Sigma, lam) and B(Sigma, lam) applied through Sigma's eigenbasis.

    B(x) = c x / (c x + lam) is the deterministic equivalent of
    (Sigma_hat + lam)^{-1} Sigma_hat, i.e. the mean map beta -> E beta_hat.
    A(x) = (c + lam c') x / (c x + lam)^2 is the equivalent of
    (Sigma_hat + lam)^{-2} Sigma_hat, which drives the noise covariance.
    """
    ev = _spectrum(spectrum)
    fp = solve_cp(ev, n, lam)
    a, b = _scalar_maps(ev, fp, lam)
    V = np.eye(ev.size) if eigvecs is None else np.asarray(eigvecs, dtype=float)
    A = (V * a) @ V.T
    B = (V * b) @ V.T
    return RepresentationPair(A, B, fp)


def representation_a_resolvent_route(spectrum, n, lam, eigvecs=None):
    """A via (c S + lam)^{-1} - lam (c S + lam)^{-2} (I - c' S), in matrix form."""
    ev = _spectrum(spectrum)
    fp = solve_cp(ev, n, lam)
    V = np.eye(ev.size) if eigvecs is None else np.asarray(eigvecs, dtype=float)
    S = (V * ev) @ V.T
    I = np.eye(ev.size)
    Rinv = np.linalg.inv(fp.c * S + lam * I)
    return Rinv - lam * Rinv @ Rinv @ (I - fp.c_prime * S)


def _design(n, Sigma_root, gen):
    p = Sigma_root.shape[0]
    U = gen.standard_normal((n, p))
    return U @ Sigma_root


def _sigma_parts(Sigma, p):
    if Sigma is None or (isinstance(Sigma, str) and Sigma == "identity"):
        return np.ones(p), np.eye(p), np.eye(p)
    Sigma = np.asarray(Sigma, dtype=float)
    ev, V = np.linalg.eigh(Sigma)
    return ev, V, sqrt_psd(Sigma)


def resolvent_equivalence_test(n, p, Sigma, lam, probes, rng: RngStream, replicates=20):
    """Worst probe deviation |tr C[(Sigma_hat + lam)^{-1} - (c Sigma + lam)^{-1}]|.

    Probes are rank-one ``C = u u'`` with unit ``u`` (trace norm one); each
    probe's deviation is averaged over ``replicates`` independent designs.
    """
    n, p = int(n), int(p)
    ev, V, root = _sigma_parts(Sigma, p)
    fp = solve_cp(ev, n, lam)
    det = (V / (fp.c * ev + lam)) @ V.T
    gen = rng.generator()
    U = gen.standard_normal((p, int(probes)))
    U /= np.linalg.norm(U, axis=0)
    target = np.einsum("ik,ij,jk->k", U, det, U)
    acc = np.zeros(int(probes))
    for r in range(int(replicates)):
        X = _design(n, root, rng.child(r).generator())
        M = X.T @ X / n + lam * np.eye(p)
        sol = np.linalg.solve(M, U)
        acc += np.einsum("ik,ik->k", U, sol) - target
    return float(np.max(np.abs(acc / replicates)))


def second_order_trace_check(n, p, lam, rng: RngStream, replicates=5):
    """Compare tr[(Sigma_hat+lam)^{-2}]/p with tr[(c+lam)^{-2}(1 - c')]  for Sigma = I."""
    fp = solve_cp(np.ones(p), n, lam)
    predicted = (1 - fp.c_prime) / (fp.c + lam) ** 2
    vals = []
    for r in range(replicates):
        X = rng.child(r).generator().standard_normal((n, p))
        e = np.linalg.eigvalsh(X.T @ X / n)
        vals.append(np.mean((e + lam) ** -2.0))
    return float(np.mean(vals)), float(predicted)


def representation_bias_test(n, p, Sigma, beta, lam, sigma, reps, rng: RngStream, probes=None):
    """Worst deviation between the Monte Carlo mean of w' beta_hat and w' B beta.

    ``probes`` is a (p, k) array of unit columns, or an int (random probes,
    default 10).  Returns ``(deviation, standard_error)`` where the standard
    error is that of the worst probe's Monte Carlo mean.
    """
    n, p = int(n), int(p)
    beta = np.asarray(beta, dtype=float)
    ev, V, root = _sigma_parts(Sigma, p)
    gen = rng.generator()
    if probes is None or isinstance(probes, (int, np.integer)):
        W = gen.standard_normal((p, 10 if probes is None else int(probes)))
        W /= np.linalg.norm(W, axis=0)
    else:
        W = np.asarray(probes, dtype=float)
    pair = representation_pair(ev, n, lam, eigvecs=V)
    target = W.T @ (pair.B @ beta)
    samples = np.empty((int(reps), W.shape[1]))
    for r in range(int(reps)):
        g = rng.child(r).generator()
        X = _design(n, root, g)
        Y = X @ beta + sigma * g.standard_normal(n)
        est = ridge_map(X, lam)(Y)
        samples[r] = W.T @ est
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(reps) if reps > 1 else np.full(W.shape[1], np.inf)
    dev = np.abs(mean - target)
    k = int(np.argmax(dev))
    return float(dev[k]), float(se[k])
