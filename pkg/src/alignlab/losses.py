"""Task cross-entropy, symmetric InfoNCE alignment, and the lambda-weighted
total objective.

The alignment loss treats matched cross-modal pairs as positives against
the other N-1 in-batch samples, computed with log-sum-exp for stability:

    L_{A->B} = -(1/N) sum_i log[ exp(z_i^A . z_i^B / tau)
                                 / sum_j exp(z_i^A . z_j^B / tau) ]

and the symmetric loss is the average of the two directions. The total
objective is task_A + task_B + lambda * align.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tape import Tape, Var

UNIT_NORM_TOL = 1e-6


@dataclass
class LossBreakdown:
    task_A: float
    task_B: float
    align_AtoB: float
    align_BtoA: float
    align: float
    total: float
    lam: float
    tau: float


def _check_embeddings(z: np.ndarray, name: str) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {z.shape}")
    norms = np.linalg.norm(z, axis=1)
    # all-zero rows are allowed: the row-normalization guard maps
    # zero-norm representations to zero rows rather than dividing by zero
    bad = (np.abs(norms - 1.0) > UNIT_NORM_TOL) & (norms > UNIT_NORM_TOL)
    if np.any(bad):
        worst = float(np.max(np.abs(norms[bad] - 1.0)))
        raise ValueError(
            f"{name} rows must be unit-norm or all-zero (max deviation {worst:.3g})"
        )
    return z


def info_nce(z_a: np.ndarray, z_b: np.ndarray, tau: float) -> float:
    """Directional InfoNCE loss L_{A->B} over one batch."""
    if tau <= 0:
        raise ValueError(f"temperature must be > 0, got {tau}")
    z_a = _check_embeddings(z_a, "z_a")
    z_b = _check_embeddings(z_b, "z_b")
    if z_a.shape != z_b.shape:
        raise ValueError(f"embedding shapes differ: {z_a.shape} vs {z_b.shape}")
    sims = (z_a @ z_b.T) / tau
    m = sims.max(axis=1)
    lse = m + np.log(np.exp(sims - m[:, None]).sum(axis=1))
    return float(np.mean(lse - np.diagonal(sims)))


def symmetric_align(z_a: np.ndarray, z_b: np.ndarray, tau: float) -> float:
    """Average of the two directional InfoNCE losses."""
    return 0.5 * (info_nce(z_a, z_b, tau) + info_nce(z_b, z_a, tau))


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean softmax cross-entropy for integer labels."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n = logits.shape[0]
    m = logits.max(axis=1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    return float(np.mean(lse - logits[np.arange(n), labels]))


def total_loss(
    logits_a: np.ndarray,
    logits_b: np.ndarray,
    labels: np.ndarray,
    z_a: np.ndarray,
    z_b: np.ndarray,
    lam: float,
    tau: float,
) -> LossBreakdown:
    """Full objective breakdown for one batch.

    At lam=0 the total equals task_A + task_B exactly (the independent
    training baseline); the alignment terms are still reported.
    """
    if lam < 0:
        raise ValueError(f"alignment weight must be >= 0, got {lam}")
    task_a = cross_entropy(logits_a, labels)
    task_b = cross_entropy(logits_b, labels)
    a2b = info_nce(z_a, z_b, tau)
    b2a = info_nce(z_b, z_a, tau)
    align = 0.5 * (a2b + b2a)
    total = task_a + task_b + lam * align if lam != 0 else task_a + task_b
    return LossBreakdown(
        task_A=task_a,
        task_B=task_b,
        align_AtoB=a2b,
        align_BtoA=b2a,
        align=align,
        total=total,
        lam=lam,
        tau=tau,
    )


# -------------------------------------------------------------- tape path


def info_nce_tape(tape: Tape, z_a: Var, z_b: Var, tau: float) -> Var:
    """Tape-recorded L_{A->B}; gradients flow into both embeddings.

    The directional loss is the mean cross-entropy of the scaled
    similarity rows against the diagonal (matched-pair) targets; the 1/tau
    scale is applied to the small embedding matrix, not the N x N sims.
    """
    n = z_a.value.shape[0]
    sims = tape.matmul(tape.scale(z_a, 1.0 / tau), tape.transpose(z_b))
    return tape.softmax_cross_entropy(sims, np.arange(n))


def info_nce_pair_tape(tape: Tape, z_a: Var, z_b: Var, tau: float) -> tuple[Var, Var]:
    """Both directional losses sharing one similarity matrix.

    L_{B->A} uses the transpose of the L_{A->B} similarity matrix, so the
    N x N matmul is built (and differentiated) only once.
    """
    n = z_a.value.shape[0]
    sims = tape.matmul(tape.scale(z_a, 1.0 / tau), tape.transpose(z_b))
    targets = np.arange(n)
    fwd = tape.softmax_cross_entropy(sims, targets)
    bwd = tape.softmax_cross_entropy(tape.transpose(sims), targets)
    return fwd, bwd


def symmetric_align_tape(tape: Tape, z_a: Var, z_b: Var, tau: float) -> Var:
    fwd, bwd = info_nce_pair_tape(tape, z_a, z_b, tau)
    return tape.scale(tape.add(fwd, bwd), 0.5)


def total_loss_tape(
    tape: Tape,
    logits_a: Var,
    logits_b: Var,
    labels: np.ndarray,
    z_a: Var,
    z_b: Var,
    lam: float,
    tau: float,
) -> Var:
    """Tape-recorded total objective.

    At lam=0 the alignment term is left off the graph entirely, so it
    contributes exactly zero gradient."""
    if lam < 0:
        raise ValueError(f"alignment weight must be >= 0, got {lam}")
    task = tape.add(
        tape.softmax_cross_entropy(logits_a, labels),
        tape.softmax_cross_entropy(logits_b, labels),
    )
    if lam == 0:
        return task
    align = symmetric_align_tape(tape, z_a, z_b, tau)
    return tape.add(task, tape.scale(align, lam))
