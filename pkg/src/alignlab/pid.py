"""Discrete partial information decomposition on small alphabets.

Decomposes I(X1,X2;Y) into redundancy R, unique information U1/U2, and
synergy S via the marginal-preserving optimization: minimize the joint
mutual information I_q(X1,X2;Y) over the polytope of distributions q that
match the observed (X1,Y) and (X2,Y) marginals. All information values are
in bits.

Two independent routes are provided: an exponentiated-gradient optimizer
with IPF marginal projection (any desk-scale alphabet) and an exhaustive
grid oracle over the polytope's free parameters (binary sources).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

LOG2 = np.log(2.0)
MAX_ALPHABET_PRODUCT = 4096

AXES = {"x1": 0, "x2": 1, "y": 2}


class PidConvergenceError(RuntimeError):
    """Optimizer failed to converge; carries the best iterate found."""

    def __init__(self, message, best=None, residuals=None):
        super().__init__(message)
        self.best = best
        self.residuals = residuals


@dataclass
class JointPmf:
    """Joint distribution over (X1, X2, Y) as a dense array p[x1, x2, y]."""

    p: np.ndarray

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.p.ndim != 3:
            raise ValueError(f"joint pmf must be 3-D (x1, x2, y), got ndim={self.p.ndim}")
        if self.p.size > MAX_ALPHABET_PRODUCT:
            raise ValueError(
                f"alphabet product {self.p.size} exceeds the desk-scale cap {MAX_ALPHABET_PRODUCT}"
            )
        if np.any(self.p < 0):
            raise ValueError("pmf entries must be non-negative")
        total = float(self.p.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"pmf must sum to 1 (got {total!r})")

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.p.shape

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"sizes": list(self.p.shape), "p": self.p.ravel().tolist()}, fh)

    @staticmethod
    def from_json(path) -> "JointPmf":
        with open(path) as fh:
            doc = json.load(fh)
        sizes = tuple(int(s) for s in doc["sizes"])
        flat = np.asarray(doc["p"], dtype=np.float64)
        if flat.size != int(np.prod(sizes)):
            raise ValueError(f"pmf file: {flat.size} entries do not match sizes {sizes}")
        return JointPmf(flat.reshape(sizes))


@dataclass
class PidResult:
    r: float
    u1: float
    u2: float
    s: float
    q_star: np.ndarray
    residuals: dict = field(default_factory=dict)
    iterations: int = 0

    def components(self) -> dict:
        return {"R": self.r, "U1": self.u1, "U2": self.u2, "S": self.s}

    def to_dict(self) -> dict:
        return {
            "R": self.r,
            "U1": self.u1,
            "U2": self.u2,
            "S": self.s,
            "residuals": self.residuals,
            "iterations": self.iterations,
        }


def _entropy(p: np.ndarray) -> float:
    """Shannon entropy in bits with the 0 log 0 := 0 convention."""
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)) / LOG2)


def _marginal(p: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    drop = tuple(a for a in range(3) if a not in axes)
    return p.sum(axis=drop)


def mutual_information(pmf: JointPmf, group_a=("x1", "x2"), group_b=("y",)) -> float:
    """Plug-in mutual information I(group_a; group_b) in bits."""
    ax_a = tuple(sorted(_axis(v) for v in group_a))
    ax_b = tuple(sorted(_axis(v) for v in group_b))
    if set(ax_a) & set(ax_b):
        raise ValueError(f"groups overlap: {group_a} vs {group_b}")
    p = pmf.p
    joint = tuple(sorted(ax_a + ax_b))
    return _entropy(_marginal(p, ax_a)) + _entropy(_marginal(p, ax_b)) - _entropy(_marginal(p, joint))


def _axis(name: str) -> int:
    try:
        return AXES[name]
    except KeyError:
        raise ValueError(f"unknown variable {name!r}; expected one of {sorted(AXES)}") from None


def _joint_mi(q: np.ndarray) -> float:
    """I(X1,X2; Y) in bits for a dense joint array."""
    return _entropy(q.sum(axis=2)) + _entropy(q.sum(axis=(0, 1))) - _entropy(q)


def _cond_mi_x1y_given_x2(q: np.ndarray) -> float:
    """I(X1; Y | X2) = H(X1,X2) + H(X2,Y) - H(X2) - H(X1,X2,Y)."""
    return (
        _entropy(q.sum(axis=2))
        + _entropy(q.sum(axis=0))
        - _entropy(q.sum(axis=(0, 2)))
        - _entropy(q)
    )


def _ipf(q: np.ndarray, m1: np.ndarray, m2: np.ndarray, rounds: int = 60, tol: float = 1e-13) -> np.ndarray:
    """Iterative proportional fitting of q onto the two (Xi, Y) marginals."""
    for _ in range(rounds):
        q1 = q.sum(axis=1)  # (x1, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(q1 > 0, m1 / np.where(q1 > 0, q1, 1.0), 0.0)
        q = q * scale[:, None, :]
        q2 = q.sum(axis=0)  # (x2, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(q2 > 0, m2 / np.where(q2 > 0, q2, 1.0), 0.0)
        q = q * scale[None, :, :]
        err = max(
            np.abs(q.sum(axis=1) - m1).max(),
            np.abs(q.sum(axis=0) - m2).max(),
        )
        if err < tol:
            break
    return q


def _marginal_residual(q: np.ndarray, m1: np.ndarray, m2: np.ndarray) -> float:
    return float(max(np.abs(q.sum(axis=1) - m1).max(), np.abs(q.sum(axis=0) - m2).max()))


def _assemble(pmf: JointPmf, q: np.ndarray, iterations: int) -> PidResult:
    """Components and identity residuals from the optimizing q."""
    i1 = mutual_information(pmf, ("x1",), ("y",))
    i2 = mutual_information(pmf, ("x2",), ("y",))
    i12 = mutual_information(pmf, ("x1", "x2"), ("y",))
    u1 = _cond_mi_x1y_given_x2(q)
    u2 = _cond_mi_x1y_given_x2(np.swapaxes(q, 0, 1))
    s = i12 - _joint_mi(q)
    r = i1 - u1
    m1 = pmf.p.sum(axis=1)
    m2 = pmf.p.sum(axis=0)
    residuals = {
        "identity_x1": abs(r + u1 - i1),
        "identity_x2": abs(r + u2 - i2),
        "sum_rule": abs(r + u1 + u2 + s - i12),
        "marginals": _marginal_residual(q, m1, m2),
    }
    return PidResult(r=r, u1=u1, u2=u2, s=s, q_star=q, residuals=residuals, iterations=iterations)


def _eg_minimize(q, support, m1, m2, py, tol, max_iter):
    """Exponentiated-gradient descent with per-step IPF re-projection."""
    obj = _joint_mi(q)
    eta = 0.5
    it = 0
    stall = 0
    while it < max_iter:
        it += 1
        qs = np.where(support, np.maximum(q, 1e-300), 1.0)
        m12 = q.sum(axis=2)
        ref = np.maximum(m12[:, :, None] * py[None, None, :], 1e-300)
        grad = np.where(support, np.log(qs / ref), 0.0)
        grad = np.where(support, grad - grad[support].mean(), 0.0)
        step = np.where(support, qs * np.exp(np.clip(-eta * grad, -50.0, 50.0)), 0.0)
        step /= step.sum()
        # keep the support strictly positive so IPF margins stay feasible
        step = np.where(support, np.maximum(step, 1e-100), 0.0)
        step = _ipf(step, m1, m2)
        new_obj = _joint_mi(step)
        if np.isfinite(new_obj) and new_obj <= obj + 1e-15:
            improved = obj - new_obj
            q, obj = step, new_obj
            eta = min(eta * 1.05, 2.0)
            stall = stall + 1 if improved < tol * 1e-2 else 0
            if stall >= 20:
                return q, obj, it, True
        else:
            eta *= 0.5
            if eta < 1e-8:
                return q, obj, it, True
    return q, obj, it, False


def broja_decompose(pmf: JointPmf, tol: float = 1e-7, max_iter: int = 100_000) -> PidResult:
    """Decompose via exponentiated-gradient descent with IPF projection.

    Minimizes I_q(X1,X2;Y) over {q : q(x1,y)=p(x1,y), q(x2,y)=p(x2,y)}.
    The objective is convex over the polytope; each step multiplies q by
    exp(-eta * grad) and projects back onto the marginal constraints.
    Boundary optima (cells of q* exactly zero) make plain IPF converge only
    sublinearly, so vanishing cells are pruned from the support in a
    threshold ladder and the descent re-polished on the reduced support; a
    pruning level is kept only if the marginals stay exact and the
    objective does not rise.
    """
    p = pmf.p
    m1 = p.sum(axis=1)
    m2 = p.sum(axis=0)
    py = p.sum(axis=(0, 1))
    # independent-given-y start: interior of the polytope on the support
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(py > 0, m1[:, None, :] * m2[None, :, :] / np.where(py > 0, py, 1.0), 0.0)
    support = q > 0
    q, obj, it, converged = _eg_minimize(q, support, m1, m2, py, tol, max_iter)
    total_it = it
    for thresh in (1e-30, 1e-12, 1e-8, 1e-6, 1e-4):
        keep = support & (q > thresh)
        if keep.sum() == support.sum():
            continue
        q_try = _ipf(np.where(keep, q, 0.0), m1, m2, rounds=2000)
        if _marginal_residual(q_try, m1, m2) > 1e-9:
            continue
        q_try, obj_try, it2, conv2 = _eg_minimize(q_try, keep, m1, m2, py, tol, max_iter - total_it)
        q_try = _ipf(q_try, m1, m2, rounds=2000)
        if _marginal_residual(q_try, m1, m2) <= 1e-9 and obj_try <= obj + 1e-6:
            q, obj, support, converged = q_try, obj_try, keep, conv2
            total_it += it2
            break
    else:
        q = _ipf(q, m1, m2, rounds=20000)
    result = _assemble(pmf, q, total_it)
    if result.residuals["marginals"] > 1e-9 or not converged:
        raise PidConvergenceError(
            f"optimizer did not converge in {total_it} iterations "
            f"(marginal residual {result.residuals['marginals']:.3g})",
            best=result,
            residuals=result.residuals,
        )
    return result


def brute_force_oracle(pmf: JointPmf, grid_steps: int = 10_000) -> PidResult:
    """Exhaustive grid minimization over the polytope (binary sources only).

    For |X1| = |X2| = 2 each y-slice of a feasible q has one free
    parameter t_y = q(x1=1, x2=1 | y); the search refines a product grid
    around the best point until the evaluation budget is spent. Results
    improve monotonically with grid_steps.
    """
    p = pmf.p
    n1, n2, ny = p.shape
    if n1 != 2 or n2 != 2 or ny > 3:
        raise ValueError(
            f"oracle supports binary sources with at most 3 target symbols, got sizes {p.shape}"
        )
    py = p.sum(axis=(0, 1))
    active = [yy for yy in range(ny) if py[yy] > 0]
    a = np.zeros(ny)
    b = np.zeros(ny)
    for yy in active:
        a[yy] = p[1, :, yy].sum() / py[yy]
        b[yy] = p[:, 1, yy].sum() / py[yy]
    lo = np.maximum(0.0, a + b - 1.0)
    hi = np.minimum(a, b)

    def build(t):
        q = np.zeros_like(p)
        for yy in active:
            t11 = t[yy]
            q[1, 1, yy] = t11 * py[yy]
            q[1, 0, yy] = (a[yy] - t11) * py[yy]
            q[0, 1, yy] = (b[yy] - t11) * py[yy]
            q[0, 0, yy] = (1.0 - a[yy] - b[yy] + t11) * py[yy]
        np.clip(q, 0.0, None, out=q)
        return q

    g = 11
    centers = (lo + hi) / 2.0
    widths = (hi - lo).copy()
    best_t = centers.copy()
    best_val = _joint_mi(build(best_t))
    evals = 0
    while evals < grid_steps and widths[list(active)].max(initial=0.0) > 1e-14:
        axes_pts = []
        for yy in range(ny):
            if yy in active and widths[yy] > 0:
                pts = np.linspace(
                    max(lo[yy], best_t[yy] - widths[yy] / 2),
                    min(hi[yy], best_t[yy] + widths[yy] / 2),
                    g,
                )
            else:
                pts = np.array([best_t[yy]])
            axes_pts.append(pts)
        grids = np.meshgrid(*axes_pts, indexing="ij")
        cand = np.stack([gg.ravel() for gg in grids], axis=1)
        for t in cand:
            val = _joint_mi(build(t))
            evals += 1
            if val < best_val - 1e-15:
                best_val = val
                best_t = t.copy()
        widths *= 2.0 / (g - 1)
    return _assemble(pmf, build(best_t), evals)


def empirical_pmf(samples, sizes: tuple[int, int, int]) -> JointPmf:
    """Normalized frequency counts from integer (x1, x2, y) samples."""
    samples = np.asarray(samples, dtype=np.int64)
    if samples.ndim != 2 or samples.shape[1] != 3:
        raise ValueError(f"samples must have shape (n, 3), got {samples.shape}")
    for col, size in enumerate(sizes):
        bad = np.flatnonzero((samples[:, col] < 0) | (samples[:, col] >= size))
        if bad.size:
            raise ValueError(
                f"sample {bad[0]}: symbol {samples[bad[0], col]} out of alphabet "
                f"size {size} for variable {('x1', 'x2', 'y')[col]}"
            )
    counts = np.zeros(sizes, dtype=np.float64)
    np.add.at(counts, (samples[:, 0], samples[:, 1], samples[:, 2]), 1.0)
    return JointPmf(counts / counts.sum())
