"""Minimal reverse-mode autodiff on dense numpy arrays.

The operation set is deliberately small: exactly what the two-encoder
contrastive training objective needs (matmul, broadcast add, ReLU, row
L2-normalization, log-sum-exp, softmax cross-entropy, scalar scaling,
mean, plus transpose/diag/sub glue). Each forward op records a node on the
owning :class:`Tape`; :meth:`Tape.backward` replays the node list in exact
reverse order, accumulating vector-Jacobian products into ``Var.grad``.

All values are float64 arrays. Gradients are zeroed at the start of every
backward pass, so a Tape can only be trusted for one backward per forward.
"""

from __future__ import annotations

import numpy as np


class Var:
    """A node value on a tape. ``grad`` is populated by ``Tape.backward``."""

    __slots__ = ("value", "tape", "grad", "_parents")

    def __init__(self, value, tape, parents=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.tape = tape
        self.grad = None
        self._parents = parents  # tuple of (Var, vjp callable)

    @property
    def shape(self):
        return self.value.shape


class Tape:
    """Ordered record of primitive operations for one forward pass."""

    def __init__(self):
        self._nodes: list[Var] = []

    def _new(self, value, parents=()) -> Var:
        v = Var(value, self, parents)
        self._nodes.append(v)
        return v

    def leaf(self, value) -> Var:
        """Register an input (parameter or constant) on the tape."""
        return self._new(value)

    def _check(self, *vars_):
        for v in vars_:
            if v.tape is not self:
                raise ValueError("variable belongs to a different tape")

    # ------------------------------------------------------------------ ops

    def matmul(self, a: Var, b: Var) -> Var:
        self._check(a, b)
        if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
            raise ValueError(
                f"matmul shape mismatch: {a.value.shape} @ {b.value.shape}"
            )
        out = a.value @ b.value
        parents = (
            (a, lambda g, b=b: g @ b.value.T),
            (b, lambda g, a=a: a.value.T @ g),
        )
        return self._new(out, parents)

    def transpose(self, a: Var) -> Var:
        self._check(a)
        return self._new(a.value.T, ((a, lambda g: g.T),))

    def add(self, a: Var, b: Var) -> Var:
        """Elementwise add with numpy broadcasting (covers bias add)."""
        self._check(a, b)
        out = a.value + b.value
        parents = (
            (a, lambda g, s=a.value.shape: _unbroadcast(g, s)),
            (b, lambda g, s=b.value.shape: _unbroadcast(g, s)),
        )
        return self._new(out, parents)

    def sub(self, a: Var, b: Var) -> Var:
        self._check(a, b)
        out = a.value - b.value
        parents = (
            (a, lambda g, s=a.value.shape: _unbroadcast(g, s)),
            (b, lambda g, s=b.value.shape: -_unbroadcast(g, s)),
        )
        return self._new(out, parents)

    def scale(self, a: Var, c: float) -> Var:
        """Multiply by a constant scalar (not differentiated through c)."""
        self._check(a)
        c = float(c)
        return self._new(a.value * c, ((a, lambda g: g * c),))

    def mul_const(self, a: Var, mask: np.ndarray) -> Var:
        """Elementwise multiply by a constant array (dropout masks)."""
        self._check(a)
        mask = np.asarray(mask, dtype=np.float64)
        return self._new(a.value * mask, ((a, lambda g: g * mask),))

    def relu(self, a: Var) -> Var:
        self._check(a)
        keep = a.value > 0.0
        return self._new(a.value * keep, ((a, lambda g: g * keep),))

    def normalize_rows(self, a: Var, eps: float = 1e-12) -> Var:
        """Scale each row to unit L2 norm.

        Rows with norm <= eps are passed through as all-zero rows with zero
        gradient (the documented zero-row guard).
        """
        self._check(a)
        norms = np.linalg.norm(a.value, axis=1, keepdims=True)
        safe = norms > eps
        inv = np.where(safe, 1.0 / np.where(safe, norms, 1.0), 0.0)
        y = a.value * inv

        def vjp(g, y=y, inv=inv):
            dot = np.sum(g * y, axis=1, keepdims=True)
            return (g - y * dot) * inv

        return self._new(y, ((a, vjp),))

    def logsumexp_rows(self, a: Var) -> Var:
        """Row-wise log-sum-exp, returned as a length-n vector."""
        self._check(a)
        m = np.max(a.value, axis=1, keepdims=True)
        z = np.exp(a.value - m)
        s = np.sum(z, axis=1, keepdims=True)
        out = (m + np.log(s)).ravel()
        soft = z / s

        def vjp(g, soft=soft):
            return soft * g[:, None]

        return self._new(out, ((a, vjp),))

    def diag_part(self, a: Var) -> Var:
        self._check(a)
        n = min(a.value.shape)
        if a.value.shape[0] != a.value.shape[1]:
            raise ValueError(f"diag_part expects a square matrix, got {a.value.shape}")

        def vjp(g, shape=a.value.shape):
            out = np.zeros(shape)
            np.fill_diagonal(out, g)
            return out

        return self._new(np.diagonal(a.value).copy(), ((a, vjp),))

    def mean(self, a: Var) -> Var:
        self._check(a)
        size = a.value.size

        def vjp(g, shape=a.value.shape, size=size):
            return np.full(shape, float(g) / size)

        return self._new(np.mean(a.value), ((a, vjp),))

    def softmax_cross_entropy(self, logits: Var, labels: np.ndarray) -> Var:
        """Mean cross-entropy between row softmaxes and integer labels."""
        self._check(logits)
        labels = np.asarray(labels)
        n = logits.value.shape[0]
        if labels.shape != (n,):
            raise ValueError(f"labels shape {labels.shape} does not match batch {n}")
        m = np.max(logits.value, axis=1, keepdims=True)
        z = np.exp(logits.value - m)
        s = np.sum(z, axis=1, keepdims=True)
        lse = (m + np.log(s)).ravel()
        picked = logits.value[np.arange(n), labels]
        out = np.mean(lse - picked)
        soft = z / s

        def vjp(g, soft=soft, labels=labels, n=n):
            grad = soft.copy()
            grad[np.arange(n), labels] -= 1.0
            return grad * (float(g) / n)

        return self._new(out, ((logits, vjp),))

    # ------------------------------------------------------------- backward

    def backward(self, loss: Var) -> None:
        """Accumulate d(loss)/d(node) into every node's ``grad``."""
        if loss.tape is not self:
            raise ValueError("loss variable belongs to a different tape")
        if loss.value.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
        for node in self._nodes:
            node.grad = None
        loss.grad = np.ones_like(loss.value)
        for node in reversed(self._nodes):
            if node.grad is None:
                continue
            for parent, vjp in node._parents:
                g = vjp(node.grad)
                parent.grad = g if parent.grad is None else parent.grad + g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum gradient g down to the given (possibly broadcast-from) shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, dim in enumerate(shape):
        if dim == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g.reshape(shape)
