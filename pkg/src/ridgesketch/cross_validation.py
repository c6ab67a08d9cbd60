"""Choosing the ridge penalty: K-fold CV with the (K-1)/K correction, train-test
validation, the exact leave-one-out shortcut and the fold-averaged estimator.

Within a training set of size n1 the penalty is applied as
``(X'X + n1 lam I)^{-1} X'Y``, the same scaling as the full-data estimator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core_types import RngStream

LEVERAGE_LIMIT = 1 - 1e-12


@dataclass(frozen=True)
class CvReport:
    lam_grid: np.ndarray
    fold_errors: np.ndarray
    cv_curve: np.ndarray
    lam_cv: float
    debias_factor: float
    lam_debiased: float
    boundary_argmin: bool
    lam_loo: float | None = None
    one_se_lam: float | None = None


def _check_grid(lam_grid):
    grid = np.asarray(lam_grid, dtype=float).ravel()
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("lam_grid must contain positive values")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("lam_grid must be strictly increasing")
    return grid


class _SpectralRidge:
    """Ridge fits for many penalties from one SVD of the training design."""

    def __init__(self, X, Y):
        self.n1 = X.shape[0]
        self.U, self.s, self.Vt = np.linalg.svd(X, full_matrices=False)
        self.uty = self.U.T @ Y

    def coef(self, lam):
        # (X'X + n1 lam I)^{-1} X'Y = V diag(s / (s^2 + n1 lam)) U'Y
        w = self.s / (self.s ** 2 + self.n1 * lam)
        return self.Vt.T @ (w * self.uty)

    def coefs(self, grid):
        W = self.s[:, None] / (self.s[:, None] ** 2 + self.n1 * grid[None, :])
        return self.Vt.T @ (W * self.uty[:, None])


def ridge_fit(X, Y, lam):
    X = np.asarray(X, dtype=float)
    return _SpectralRidge(X, np.asarray(Y, dtype=float)).coef(lam)


def fold_indices(n, K, rng: RngStream):
    """Random assignment of n rows to K equal folds; ``n mod K`` rows are dropped."""
    n, K = int(n), int(K)
    if K < 2:
        raise ValueError("K must be at least 2")
    n0 = n // K
    if n0 == 0:
        raise ValueError(f"cannot form {K} non-empty folds from {n} rows")
    if n % K:
        warnings.warn(f"dropping {n % K} rows so that {K} folds have equal size {n0}")
    perm = rng.generator().permutation(n)[: n0 * K]
    return perm.reshape(K, n0)


def _report(grid, fold_errors, factor, lam_loo=None):
    curve = fold_errors.mean(axis=0)
    k = int(np.argmin(curve))
    lam_cv = float(grid[k])
    one_se = None
    if fold_errors.shape[0] > 1:
        se = fold_errors.std(axis=0, ddof=1) / np.sqrt(fold_errors.shape[0])
        ok = np.nonzero(curve <= curve[k] + se[k])[0]
        one_se = float(grid[ok.max()])
    boundary = grid.size > 1 and k in (0, grid.size - 1)
    return CvReport(grid, fold_errors, curve, lam_cv, float(factor), lam_cv * factor,
                    bool(boundary), lam_loo, one_se)


def kfold_cv(X, Y, lam_grid, K, rng: RngStream) -> CvReport:
    """K-fold cross-validation over ``lam_grid``; ``lam_debiased = lam_cv (K-1)/K``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[1] == 0:
        raise ValueError("X has no columns")
    grid = _check_grid(lam_grid)
    folds = fold_indices(X.shape[0], K, rng)
    errs = np.empty((K, grid.size))
    for k in range(K):
        val = folds[k]
        train = np.concatenate([folds[j] for j in range(K) if j != k])
        B = _SpectralRidge(X[train], Y[train]).coefs(grid)
        resid = Y[val][:, None] - X[val] @ B
        errs[k] = np.mean(resid ** 2, axis=0)
    return _report(grid, errs, (K - 1) / K)


def train_test_validate(X, Y, lam_grid, train_fraction, rng: RngStream) -> CvReport:
    """Single random split; the debias factor is the training fraction."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    grid = _check_grid(lam_grid)
    n = X.shape[0]
    n_train = int(round(train_fraction * n))
    if n_train < 1 or n_train >= n:
        raise ValueError(f"split leaves an empty part (n={n}, n_train={n_train})")
    perm = rng.generator().permutation(n)
    tr, te = perm[:n_train], perm[n_train:]
    B = _SpectralRidge(X[tr], Y[tr]).coefs(grid)
    errs = np.mean((Y[te][:, None] - X[te] @ B) ** 2, axis=0)[None, :]
    return _report(grid, errs, n_train / n)


def loo_shortcut(X, Y, lam_grid):
    """Exact leave-one-out error per lam from the hat-matrix diagonal.

    loo(lam) = mean[((Y_i - X_i' beta(lam)) / (1 - S_ii))^2],  S = X (X'X + n lam I)^{-1} X'.
    Returns ``(loo_curve, lam_loo)``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    grid = _check_grid(lam_grid)
    n = X.shape[0]
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    uty = U.T @ Y
    curve = np.empty(grid.size)
    for j, lam in enumerate(grid):
        shrink = s ** 2 / (s ** 2 + n * lam)
        fitted = U @ (shrink * uty)
        lev = np.einsum("ij,j,ij->i", U, shrink, U)
        if np.any(lev >= LEVERAGE_LIMIT):
            i = int(np.argmax(lev))
            raise ValueError(f"leverage S_ii = {lev[i]:.15f} at row {i} is too close to 1 (lam={lam:g})")
        curve[j] = np.mean(((Y - fitted) / (1 - lev)) ** 2)
    return curve, float(grid[int(np.argmin(curve))])


def loo_brute_force(X, Y, lam_grid):
    """Leave-one-out error by n explicit refits (reference implementation)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    grid = _check_grid(lam_grid)
    n, p = X.shape
    curve = np.zeros(grid.size)
    for i in range(n):
        keep = np.arange(n) != i
        Xi, Yi = X[keep], Y[keep]
        for j, lam in enumerate(grid):
            # penalty uses the full n, matching the shortcut's S(lam)
            b = np.linalg.solve(Xi.T @ Xi + n * lam * np.eye(p), Xi.T @ Yi)
            curve[j] += (Y[i] - X[i] @ b) ** 2
    return curve / n


def averaged_fold_estimator(X, Y, lam, K, rng: RngStream):
    """Mean of the K training-fold ridge estimators at ``lam``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    folds = fold_indices(X.shape[0], K, rng)
    coefs = []
    for k in range(K):
        train = np.concatenate([folds[j] for j in range(K) if j != k])
        coefs.append(_SpectralRidge(X[train], Y[train]).coef(lam))
    return np.mean(coefs, axis=0)
