"""Ridge regression and its sketched variants, all as linear maps Y -> T Y.

Every estimator returns a :class:`LinearEstimator` holding the p x n matrix
``T``.  Because the estimate is linear in Y, its risk under the
random-effects prior can be computed exactly given the design (and the
sketch), see :func:`linear_risk`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core_types import ModelParams, RngStream

ORTHOGONAL_FAMILIES = ("subsample", "haar", "srht")
SKETCH_FAMILIES = ORTHOGONAL_FAMILIES + ("gaussian",)
SKETCH_KINDS = ("primal", "dual", "full", "marginal")
SRHT_MAX_PAD = 2 ** 20


@dataclass(frozen=True)
class LinearEstimator:
    T: np.ndarray
    label: str = "linear"

    def __call__(self, Y) -> np.ndarray:
        return self.T @ np.asarray(Y, dtype=float)

    @property
    def shape(self):
        return self.T.shape


@dataclass(frozen=True)
class SketchSpec:
    """Which sketch to apply.

    ``ratio`` is m/n for primal and full sketches and d/p for dual sketches.
    Marginal regression ignores ``family`` and ``ratio``.
    """

    kind: str
    family: str = "haar"
    ratio: float = 1.0

    def __post_init__(self):
        if self.kind not in SKETCH_KINDS:
            raise ValueError(f"unknown sketch kind {self.kind!r}")
        if self.kind != "marginal":
            if self.family not in SKETCH_FAMILIES:
                raise ValueError(f"unknown sketch family {self.family!r}")
            if not 0 < self.ratio <= 1:
                raise ValueError(f"sketch ratio must lie in (0, 1], got {self.ratio}")

    def size(self, n: int, p: int) -> int:
        base = p if self.kind == "dual" else n
        return max(1, int(round(self.ratio * base)))


@dataclass(frozen=True)
class RiskReport:
    bias2: float
    variance: float
    mse: float
    residual: float | None = None

    @classmethod
    def from_parts(cls, bias2, variance, residual=None):
        bias2, variance = float(bias2), float(variance)
        return cls(bias2, variance, bias2 + variance,
                   None if residual is None else float(residual))

    def as_dict(self):
        out = {"bias2": self.bias2, "variance": self.variance, "mse": self.mse}
        if self.residual is not None:
            out["residual"] = self.residual
        return out


def _spd_solve(A, B):
    """Solve A Z = B for symmetric positive-definite A via Cholesky."""
    c = linalg.cho_factor(A, lower=True, check_finite=False)
    return linalg.cho_solve(c, B, check_finite=False)


def ridge_map(X, lam) -> LinearEstimator:
    """T = (X'X/n + lam I)^{-1} X'/n.

    The p x p primal system is solved when p <= n, the n x n dual system
    ``X'(XX'/n + lam I)^{-1}/n`` otherwise.  ``lam = 0`` gives least squares
    and requires X'X to be invertible.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if lam < 0:
        raise ValueError(f"lam must be nonnegative, got {lam}")
    if lam == 0:
        rank = np.linalg.matrix_rank(X)
        if rank < p:
            raise ValueError(f"lam = 0 needs full column rank; X has rank {rank} < p = {p}")
        return LinearEstimator(np.linalg.pinv(X), "ols")
    if p <= n:
        T = _spd_solve(X.T @ X / n + lam * np.eye(p), X.T / n)
    else:
        T = _spd_solve(X @ X.T / n + lam * np.eye(n), X).T / n
    return LinearEstimator(T, f"ridge(lam={lam:g})")


def ridge_primal(X, lam) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    return np.linalg.solve(X.T @ X / n + lam * np.eye(p), X.T / n)


def ridge_dual(X, lam) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    return X.T @ np.linalg.solve(X @ X.T / n + lam * np.eye(n), np.eye(n)) / n


def _hadamard_rows(row_idx, ncols):
    """Rows ``row_idx`` of the Sylvester Hadamard matrix, first ``ncols`` columns."""
    anded = np.bitwise_and.outer(np.asarray(row_idx, dtype=np.int64), np.arange(ncols, dtype=np.int64))
    parity = np.zeros(anded.shape, dtype=np.int64)
    while np.any(anded):
        parity ^= anded & 1
        anded >>= 1
    return 1.0 - 2.0 * parity


def make_sketch(family, rows, cols, rng: RngStream) -> np.ndarray:
    """A ``rows x cols`` sketching matrix.

    Orthogonal families (subsample, haar, srht) return matrices with
    orthonormal rows, ``S S' = I``.  ``gaussian`` returns i.i.d. N(0, 1/rows)
    entries, so that ``E[S'S] = I``.

    SRHT pads ``cols`` to the next power of two N and uses sampled rows of
    ``H D / sqrt(N)`` (H Hadamard, D random signs).  When cols < N the
    retained column block is re-orthonormalized with a thin QR so that the
    orthogonality contract holds exactly.
    """
    rows, cols = int(rows), int(cols)
    if family not in SKETCH_FAMILIES:
        raise ValueError(f"unknown sketch family {family!r}")
    if rows < 0 or cols < 1:
        raise ValueError(f"invalid sketch shape ({rows}, {cols})")
    gen = rng.generator()
    if rows == 0:
        return np.zeros((0, cols))
    if family == "gaussian":
        return gen.standard_normal((rows, cols)) / np.sqrt(rows)
    if rows > cols:
        raise ValueError(f"orthogonal sketch needs rows <= cols, got {rows} > {cols}")
    if family == "subsample":
        idx = gen.choice(cols, size=rows, replace=False)
        S = np.zeros((rows, cols))
        S[np.arange(rows), idx] = 1.0
        return S
    if family == "haar":
        G = gen.standard_normal((cols, rows))
        Q, R = np.linalg.qr(G)
        Q = Q * np.sign(np.diag(R))
        return Q.T
    # srht
    N = 1 << max(0, (cols - 1).bit_length())
    if N > SRHT_MAX_PAD:
        raise ValueError(f"srht padding {N} exceeds budget {SRHT_MAX_PAD}")
    idx = gen.choice(N, size=rows, replace=False)
    signs = gen.choice([-1.0, 1.0], size=cols)
    S = _hadamard_rows(idx, cols) * signs / np.sqrt(N)
    if cols < N:
        Q, R = np.linalg.qr(S.T)
        S = (Q * np.sign(np.diag(R))).T
    return S


def marginal_map(X, lam) -> LinearEstimator:
    X = np.asarray(X, dtype=float)
    return LinearEstimator(X.T / (X.shape[0] * lam), f"marginal(lam={lam:g})")


def _sketched_resolvent_apply(P, n, lam, B):
    """(P'P/n + lam I_p)^{-1} B, using the m x m Woodbury form when m < p."""
    m, p = P.shape
    if m < p:
        inner = _spd_solve(P @ P.T + n * lam * np.eye(m), P @ B)
        return (B - P.T @ inner) / lam
    return _spd_solve(P.T @ P / n + lam * np.eye(p), B)


def primal_sketch_map(X, lam, L) -> LinearEstimator:
    """T = (X'L'LX/n + lam I)^{-1} X'/n; an empty sketch gives the marginal map."""
    X = np.asarray(X, dtype=float)
    L = np.asarray(L, dtype=float)
    n = X.shape[0]
    if lam <= 0:
        raise ValueError("primal sketch needs lam > 0")
    if L.ndim != 2 or L.shape[1] != n:
        raise ValueError(f"sketch has shape {L.shape}, expected (m, {n})")
    if L.shape[0] == 0:
        return marginal_map(X, lam)
    T = _sketched_resolvent_apply(L @ X, n, lam, X.T / n)
    return LinearEstimator(T, f"primal_sketch(m={L.shape[0]}, lam={lam:g})")


def dual_sketch_map(X, lam, R) -> LinearEstimator:
    """T = X'(XRR'X'/n + lam I)^{-1}/n; an empty sketch gives the marginal map."""
    X = np.asarray(X, dtype=float)
    R = np.asarray(R, dtype=float)
    n, p = X.shape
    if lam <= 0:
        raise ValueError("dual sketch needs lam > 0")
    if R.ndim != 2 or R.shape[0] != p:
        raise ValueError(f"sketch has shape {R.shape}, expected ({p}, d)")
    if R.shape[1] == 0:
        return marginal_map(X, lam)
    XR = X @ R
    T = _spd_solve(XR @ XR.T / n + lam * np.eye(n), X).T / n
    return LinearEstimator(T, f"dual_sketch(d={R.shape[1]}, lam={lam:g})")


def full_sketch_map(X, lam, L) -> LinearEstimator:
    """T = (X'L'LX/n + lam I)^{-1} X'L'L/n, ridge on the sketched pair (LX, LY)."""
    X = np.asarray(X, dtype=float)
    L = np.asarray(L, dtype=float)
    n, p = X.shape
    if lam <= 0:
        raise ValueError("full sketch needs lam > 0")
    if L.ndim != 2 or L.shape[1] != n:
        raise ValueError(f"sketch has shape {L.shape}, expected (m, {n})")
    if L.shape[0] == 0:
        return LinearEstimator(np.zeros((p, n)), "full_sketch(m=0)")
    P = L @ X
    T = _sketched_resolvent_apply(P, n, lam, P.T @ L / n)
    return LinearEstimator(T, f"full_sketch(m={L.shape[0]}, lam={lam:g})")


def sketched_map(X, lam, spec: SketchSpec, rng: RngStream) -> LinearEstimator:
    """Build the estimator described by ``spec``, drawing its sketch from ``rng``."""
    n, p = np.shape(X)
    if spec.kind == "marginal":
        return marginal_map(X, lam)
    size = spec.size(n, p)
    if spec.kind == "dual":
        R = make_sketch(spec.family, size, p, rng).T
        return dual_sketch_map(X, lam, R)
    L = make_sketch(spec.family, size, n, rng)
    if spec.kind == "primal":
        return primal_sketch_map(X, lam, L)
    return full_sketch_map(X, lam, L)


def linear_risk(T, X, model: ModelParams, residual: bool = False) -> RiskReport:
    """Exact risk of ``beta_hat = T Y`` conditional on X.

    Averages over beta ~ (0, alpha2/p I) and eps ~ (0, sigma2 I):

        bias2    = alpha2/p ||T X - I||_F^2
        variance = sigma2 ||T||_F^2
        residual = alpha2/p ||(I - X T) X||_F^2 / n + sigma2/n ||I - X T||_F^2
    """
    if isinstance(T, LinearEstimator):
        T = T.T
    T = np.asarray(T, dtype=float)
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if T.shape != (p, n):
        raise ValueError(f"map has shape {T.shape}, expected ({p}, {n})")
    a2, s2 = model.alpha2, model.sigma2
    # ||TX - I||^2 = tr(T'T XX') - 2 tr(TX) + p, cheaper than forming TX when n < p
    if n < p:
        gram = X @ X.T
        tx_fro = np.sum((T.T @ T) * gram)
    else:
        tx_fro = np.sum((T @ X) ** 2)
    tr_tx = np.sum(T * X.T)
    bias2 = a2 / p * max(tx_fro - 2 * tr_tx + p, 0.0)
    variance = s2 * np.sum(T ** 2)
    res = None
    if residual:
        H = np.eye(n) - X @ T
        res = a2 / p * np.sum((H @ X) ** 2) / n + s2 / n * np.sum(H ** 2)
    return RiskReport.from_parts(bias2, variance, res)
