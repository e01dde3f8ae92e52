"""Representation-similarity metrics: linear CKA, SVCCA, Mutual-KNN.

CKA works on mean-centered (but not standardized) features via the linear
kernel HSIC. SVCCA z-scores each feature dimension, truncates with SVD at
99% explained variance, then averages canonical correlations. Mutual-KNN
counts shared k-nearest-neighbor relations under Euclidean distance and
normalizes by n*k (the self-alignment value), with ties broken by
ascending row index.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, asdict

import numpy as np

from .linalg import check_matrix, svd_truncated


@dataclass
class AlignmentReport:
    cka: float
    svcca: float
    mknn: float
    k_used: int
    svcca_k: int

    def to_dict(self) -> dict:
        return asdict(self)


def center(f: np.ndarray) -> np.ndarray:
    """Subtract each column mean."""
    f = check_matrix(f)
    return f - f.mean(axis=0, keepdims=True)


def hsic_linear(fa: np.ndarray, fb: np.ndarray) -> float:
    """Linear-kernel HSIC of two centered representation matrices:
    ||FA^T FB||_F^2 / (n-1)^2."""
    fa = check_matrix(fa, "FA")
    fb = check_matrix(fb, "FB")
    n = fa.shape[0]
    if fb.shape[0] != n:
        raise ValueError(f"row counts differ: {n} vs {fb.shape[0]}")
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    cross = fa.T @ fb
    return float(np.sum(cross * cross)) / (n - 1) ** 2


def cka(fa: np.ndarray, fb: np.ndarray) -> float:
    """Linear CKA in [0, 1]. Inputs are mean-centered internally."""
    fa = center(fa)
    fb = center(fb)
    haa = hsic_linear(fa, fa)
    hbb = hsic_linear(fb, fb)
    if haa <= 0.0 or hbb <= 0.0:
        raise ValueError("degenerate (constant) input: self-HSIC is zero")
    return hsic_linear(fa, fb) / np.sqrt(haa * hbb)


def svcca(fa: np.ndarray, fb: np.ndarray, variance_keep: float = 0.99, ridge: float = 1e-10) -> tuple[float, int]:
    """SVCCA score and the number of canonical directions used.

    Steps: z-score columns (eps=1e-8 guard on sigma), truncated SVD keeping
    the smallest k whose cumulative squared singular values reach
    variance_keep (capped at min(dA, dB)), CCA between the two singular-
    vector bases, mean of the canonical correlations.
    """
    fa = check_matrix(fa, "FA")
    fb = check_matrix(fb, "FB")
    if fa.shape[0] != fb.shape[0]:
        raise ValueError(f"row counts differ: {fa.shape[0]} vs {fb.shape[0]}")
    if not 0.0 < variance_keep <= 1.0:
        raise ValueError(f"variance_keep must be in (0, 1], got {variance_keep}")
    cap = min(fa.shape[1], fb.shape[1])

    def reduce(f, name):
        z = (f - f.mean(axis=0)) / (f.std(axis=0) + 1e-8)
        u, s, _ = svd_truncated(z, min(z.shape))
        energy = s**2
        total = energy.sum()
        if total <= 0:
            raise ValueError(f"rank collapse on side {name}: no variance after standardization")
        frac = np.cumsum(energy) / total
        k = int(np.searchsorted(frac, variance_keep - 1e-12) + 1)
        k = min(k, cap)
        return u[:, :k]

    ua = reduce(fa, "A")
    ub = reduce(fb, "B")
    corrs = _cca_correlations(ua, ub, ridge)
    if len(corrs) < 1:
        raise ValueError("rank collapse: no canonical directions")
    return float(np.mean(corrs)), len(corrs)


def _cca_correlations(x: np.ndarray, y: np.ndarray, ridge: float) -> np.ndarray:
    """Canonical correlations via SVD of the whitened cross-covariance."""
    x = x - x.mean(axis=0)
    y = y - y.mean(axis=0)
    n = x.shape[0]
    sxx = x.T @ x / (n - 1) + ridge * np.eye(x.shape[1])
    syy = y.T @ y / (n - 1) + ridge * np.eye(y.shape[1])
    sxy = x.T @ y / (n - 1)

    def inv_sqrt(s):
        vals, vecs = np.linalg.eigh(s)
        vals = np.clip(vals, ridge, None)
        return vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.T

    m = inv_sqrt(sxx) @ sxy @ inv_sqrt(syy)
    sv = np.linalg.svd(m, compute_uv=False)
    return np.clip(sv, 0.0, 1.0)


def _knn_sets(f: np.ndarray, k: int) -> np.ndarray:
    """Boolean n x n matrix: entry (i, j) true iff j is among the k nearest
    neighbors of i (self excluded, ties by ascending row index)."""
    n = f.shape[0]
    d2 = np.sum(f**2, axis=1, keepdims=True) - 2.0 * (f @ f.T) + np.sum(f**2, axis=1)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    mask = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), k)
    mask[rows, order[:, :k].ravel()] = True
    return mask


def mutual_knn(fa: np.ndarray, fb: np.ndarray, k: int = 10) -> float:
    """Fraction of k-nearest-neighbor relations shared by both spaces,
    normalized to [0, 1] by the self-alignment value n*k."""
    fa = check_matrix(fa, "FA")
    fb = check_matrix(fb, "FB")
    n = fa.shape[0]
    if fb.shape[0] != n:
        raise ValueError(f"row counts differ: {n} vs {fb.shape[0]}")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    agree = _knn_sets(fa, k) & _knn_sets(fb, k)
    return float(agree.sum()) / (n * k)


def alignment_report(
    fa: np.ndarray,
    fb: np.ndarray,
    knn_k: int = 10,
    svcca_variance_keep: float = 0.99,
) -> AlignmentReport:
    """All three metrics on mean-centered representations."""
    fa_c = center(fa)
    fb_c = center(fb)
    svcca_val, svcca_k = svcca(fa_c, fb_c, svcca_variance_keep)
    return AlignmentReport(
        cka=cka(fa_c, fb_c),
        svcca=svcca_val,
        mknn=mutual_knn(fa_c, fb_c, knn_k),
        k_used=knn_k,
        svcca_k=svcca_k,
    )


def ingest_matrix(path, fmt: str = "csv") -> np.ndarray:
    """Read a numeric matrix from a CSV file.

    One sample per row; a single header row is auto-detected (a first row
    whose cells are not all numeric). Ragged rows and non-finite values are
    rejected with their 1-based row number.
    """
    if fmt != "csv":
        raise ValueError(f"unsupported matrix format {fmt!r}")
    rows = []
    width = None
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            try:
                vals = [float(cell) for cell in rec]
            except ValueError as exc:
                if lineno == 1 and not rows:
                    continue  # header row
                raise ValueError(f"row {lineno}: non-numeric entry ({exc})") from exc
            if any(not np.isfinite(v) for v in vals):
                raise ValueError(f"row {lineno}: non-finite entry")
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ValueError(f"row {lineno}: expected {width} columns, got {len(vals)}")
            rows.append(vals)
    if not rows:
        raise ValueError(f"no numeric rows found in {path}")
    return np.asarray(rows, dtype=np.float64)


def write_matrix(matrix: np.ndarray, path) -> None:
    """Write a matrix as plain CSV with 17-significant-digit floats."""
    matrix = check_matrix(matrix)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in matrix:
            writer.writerow([f"{v:.17g}" for v in row])
