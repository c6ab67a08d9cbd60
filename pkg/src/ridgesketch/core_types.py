"""Data model, seeded random streams and synthetic problem generation.

The random-effects linear model used throughout the package is

    Y = X beta + eps,   X = U Sigma^{1/2},   beta_i ~ N(0, alpha2 / p),   eps ~ N(0, sigma2 I).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EIG_FLOOR = 1e-12


@dataclass(frozen=True)
class SpectrumParams:
    """Evaluation point (gamma, lam) of a Marchenko-Pastur functional."""

    gamma: float
    lam: float
    allow_zero_lam: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.lam < 0 or (self.lam == 0 and not self.allow_zero_lam):
            raise ValueError(f"lam must be positive, got {self.lam}")


@dataclass(frozen=True)
class ModelParams:
    """Signal strength alpha2 = E||beta||^2 and noise variance sigma2."""

    alpha2: float
    sigma2: float

    def __post_init__(self):
        if self.alpha2 < 0:
            raise ValueError(f"alpha2 must be nonnegative, got {self.alpha2}")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def snr(self) -> float:
        return self.alpha2 / self.sigma2

    @classmethod
    def from_scales(cls, alpha: float, sigma: float) -> "ModelParams":
        return cls(alpha2=float(alpha) ** 2, sigma2=float(sigma) ** 2)


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream keyed by (seed, stream_id).

    Streams with different ids are spawned from the same master
    ``SeedSequence`` and are statistically independent.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngStream":
        # replicate r of stream s maps to a fixed id, independent of scheduling
        return RngStream(self.seed, (int(self.stream_id) << 20) + int(index) + 1)


@dataclass(frozen=True)
class RegressionProblem:
    X: np.ndarray
    beta: np.ndarray
    sigma: float
    seed: int = 0

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"X must be a non-empty matrix, got shape {X.shape}")
        if beta.shape != (X.shape[1],):
            raise ValueError(f"beta has shape {beta.shape}, expected ({X.shape[1]},)")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        X.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "beta", beta)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def sqrt_psd(sigma_matrix) -> np.ndarray:
    """Symmetric square root of a positive-definite matrix.

    Raises ``ValueError`` naming the smallest eigenvalue when the matrix is
    not positive definite; eigenvalues are clamped at ``EIG_FLOOR``.
    """
    S = np.asarray(sigma_matrix, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"covariance must be square, got shape {S.shape}")
    if not np.allclose(S, S.T, atol=1e-10 * max(1.0, np.abs(S).max())):
        raise ValueError("covariance must be symmetric")
    evals, evecs = np.linalg.eigh(S)
    if evals[0] <= 0:
        raise ValueError(
            f"covariance is not positive definite: smallest eigenvalue {evals[0]:.3e}"
        )
    evals = np.maximum(evals, EIG_FLOOR)
    return (evecs * np.sqrt(evals)) @ evecs.T


def generate_problem(n, p, model: ModelParams, sigma_struct=None, rng: RngStream | None = None,
                     ) -> RegressionProblem:
    """Draw a design ``X = U Sigma^{1/2}`` and coefficients from the random-effects prior.

    ``sigma_struct`` is ``None`` or ``"identity"`` for Sigma = I, or an explicit
    p x p symmetric positive-definite matrix.
    """
    n, p = int(n), int(p)
    if n < 1 or p < 1:
        raise ValueError(f"need n, p >= 1, got n={n}, p={p}")
    rng = rng or RngStream(0)
    gen = rng.generator()
    U = gen.standard_normal((n, p))
    if sigma_struct is None or (isinstance(sigma_struct, str) and sigma_struct == "identity"):
        X = U
    else:
        root = sqrt_psd(sigma_struct)
        if root.shape != (p, p):
            raise ValueError(f"covariance has shape {root.shape}, expected ({p}, {p})")
        X = U @ root
    beta = gen.standard_normal(p) * np.sqrt(model.alpha2 / p)
    return RegressionProblem(X=X, beta=beta, sigma=float(np.sqrt(model.sigma2)), seed=rng.seed)


def draw_response(prob: RegressionProblem, rng: RngStream) -> np.ndarray:
    """Y = X beta + eps with i.i.d. N(0, sigma^2) noise."""
    gen = rng.generator()
    eps = gen.standard_normal(prob.n) * prob.sigma
    return prob.X @ prob.beta + eps
