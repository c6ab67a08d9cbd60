"""CSV ingestion and cross-validation on real datasets."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core_types import RngStream
from .cross_validation import CvReport, kfold_cv, ridge_fit


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    columns: tuple
    response: str
    means: np.ndarray | None = None
    scales: np.ndarray | None = None


def ingest_csv(path, response_column, standardize=False) -> Dataset:
    """Read a numeric CSV with a header row.

    With ``standardize`` every feature column and the response are z-scored
    (population variance); the means and scales are kept on the dataset.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if response_column not in header:
        raise ValueError(f"{path}: response column {response_column!r} not in header {header}")
    body = rows[1:]
    if not body:
        raise ValueError(f"{path}: no data rows")
    width = len(header)
    ragged = [i + 1 for i, r in enumerate(body) if len(r) != width]
    if ragged:
        raise ValueError(f"{path}: rows {ragged} do not have {width} cells")
    data = np.empty((len(body), width))
    bad = []
    for i, r in enumerate(body):
        try:
            vals = [float(c) for c in r]
        except ValueError:
            bad.append(i + 1)
            continue
        if not all(math.isfinite(v) for v in vals):
            bad.append(i + 1)
            continue
        data[i] = vals
    if bad:
        raise ValueError(f"{path}: non-numeric or missing values in data rows {bad}")
    j = header.index(response_column)
    y = data[:, j]
    X = np.delete(data, j, axis=1)
    cols = tuple(h for k, h in enumerate(header) if k != j)
    if not standardize:
        return Dataset(X, y, cols, response_column)
    full = np.column_stack([X, y])
    means = full.mean(axis=0)
    scales = full.std(axis=0)
    constant = scales == 0
    scales[constant] = 1.0
    z = (full - means) / scales
    return Dataset(z[:, :-1], z[:, -1], cols, response_column, means, scales)


@dataclass(frozen=True)
class DatasetCvResult:
    reports: tuple
    test_err_cv: np.ndarray | None
    test_err_debiased: np.ndarray | None

    def summary(self):
        out = {
            "seeds": len(self.reports),
            "debias_factor": self.reports[0].debias_factor,
            "lam_cv_mean": float(np.mean([r.lam_cv for r in self.reports])),
            "lam_debiased_mean": float(np.mean([r.lam_debiased for r in self.reports])),
        }
        if self.test_err_cv is not None:
            out["test_err_cv_mean"] = float(self.test_err_cv.mean())
            out["test_err_debiased_mean"] = float(self.test_err_debiased.mean())
            out["test_err_delta_mean"] = float((self.test_err_debiased - self.test_err_cv).mean())
        return out


def cv_on_dataset(dataset: Dataset, K, lam_grid, test_fraction, seeds) -> DatasetCvResult:
    """Per seed: hold out ``test_fraction`` of rows, run K-fold CV on the rest,
    refit on the training part at lam_cv and at lam_debiased, score on the test part.
    """
    X, y = dataset.X, dataset.y
    n = X.shape[0]
    reports, e_cv, e_db = [], [], []
    for seed in seeds:
        stream = RngStream(int(seed), 0)
        if test_fraction > 0:
            perm = stream.generator().permutation(n)
            n_test = max(1, int(round(test_fraction * n)))
            te, tr = perm[:n_test], perm[n_test:]
        else:
            tr, te = np.arange(n), None
        rep: CvReport = kfold_cv(X[tr], y[tr], lam_grid, K, stream.child(0))
        reports.append(rep)
        if te is not None:
            for lam, sink in ((rep.lam_cv, e_cv), (rep.lam_debiased, e_db)):
                b = ridge_fit(X[tr], y[tr], lam)
                sink.append(float(np.mean((y[te] - X[te] @ b) ** 2)))
    if test_fraction > 0:
        return DatasetCvResult(tuple(reports), np.array(e_cv), np.array(e_db))
    return DatasetCvResult(tuple(reports), None, None)
