"""Dense linear-algebra helpers shared by metrics and data generation."""

from __future__ import annotations

import numpy as np


def check_matrix(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate a dense 2-D float matrix with finite entries."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense product with an explicit shape error."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return a @ b


def svd_truncated(m: np.ndarray, k: int):
    """Top-k singular triplets of m.

    Returns (U, s, V) with U of shape (rows, k), s non-increasing, V of
    shape (cols, k), so that U @ diag(s) @ V.T is the best rank-k
    approximation.
    """
    m = check_matrix(m)
    if not 1 <= k <= min(m.shape):
        raise ValueError(f"k={k} out of range for shape {m.shape}")
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"SVD did not converge: {exc}") from exc
    return u[:, :k], s[:k], vt[:k].T
