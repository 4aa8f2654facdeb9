"""Dense float64 tensors with reverse-mode differentiation.

Every operation records its inputs and a vector-Jacobian closure on the
value it returns, so ``backward()`` on a scalar fills ``grad`` on every
reachable tensor. Tapes are per-forward-pass and single-threaded; separate
forward passes are independent.

All forward results are checked for NaN/Inf and trip :class:`NonFiniteError`
immediately, which keeps training divergence diagnosable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NonFiniteError(FloatingPointError):
    pass


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 2:
            raise ShapeError(f"tensors are at most 2-D, got shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError("item() needs a single-element tensor")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def backward(self):
        """Fill ``grad`` on every tensor reachable from this scalar.

        Grads inside the tape are reset first, so repeated calls on the same
        tape are bitwise identical.
        """
        if self.size != 1:
            raise ShapeError("backward() requires a scalar output")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._vjp is None or node.grad is None:
                continue
            for parent, grad in zip(node._parents, node._vjp(node.grad)):
                if grad is None:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += grad

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"


def _t(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], vjp) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError("non-finite value produced by a tensor operation")
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = parents
        out._vjp = vjp
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------- arithmetic

def add(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out, (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    out = a.data - b.data

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(out, (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    out = a.data * b.data

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(out, (a, b), vjp)


def div(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    if np.any(b.data == 0.0):
        raise NonFiniteError("division by zero")
    out = a.data / b.data

    def vjp(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    return _make(out, (a, b), vjp)


def neg(a) -> Tensor:
    a = _t(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def scale(a, c: float) -> Tensor:
    a = _t(a)
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,))


def matmul(a, b) -> Tensor:
    a, b = _t(a), _t(b)
    if a.ndim != 2 or b.ndim not in (1, 2):
        raise ShapeError(f"matmul expects 2-D @ (1|2)-D, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def vjp(g):
        if b.ndim == 1:
            return np.outer(g, b.data), a.data.T @ g
        return g @ b.data.T, a.data.T @ g

    return _make(out, (a, b), vjp)


def transpose(a) -> Tensor:
    a = _t(a)
    if a.ndim != 2:
        raise ShapeError("transpose expects a matrix")
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,))


# ------------------------------------------------------------- restructuring

def concat(parts, axis: int = 0) -> Tensor:
    parts = [_t(p) for p in parts]
    if not parts:
        raise ShapeError("concat of nothing")
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(out, tuple(parts), vjp)


def stack_rows(vectors) -> Tensor:
    vectors = [_t(v) for v in vectors]
    if any(v.ndim != 1 for v in vectors):
        raise ShapeError("stack_rows expects vectors")
    out = np.stack([v.data for v in vectors], axis=0)

    def vjp(g):
        return tuple(g[i] for i in range(len(vectors)))

    return _make(out, tuple(vectors), vjp)


def as_column(v) -> Tensor:
    v = _t(v)
    if v.ndim != 1:
        raise ShapeError("as_column expects a vector")
    return _make(v.data.reshape(-1, 1), (v,), lambda g: (g.reshape(-1),))


def take_column(a, j: int) -> Tensor:
    a = _t(a)
    if a.ndim != 2:
        raise ShapeError("take_column expects a matrix")
    out = a.data[:, j].copy()

    def vjp(g):
        full = np.zeros_like(a.data)
        full[:, j] = g
        return (full,)

    return _make(out, (a,), vjp)


def gather_rows(a, index) -> Tensor:
    """Select rows (or vector elements) by integer index, with repetitions."""
    a = _t(a)
    index = np.asarray(index, dtype=np.int64)
    out = a.data[index]

    def vjp(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return _make(out, (a,), vjp)


# ----------------------------------------------------------------- reductions

def row_sum(a) -> Tensor:
    """Sum over rows: (N, F) -> (F,)."""
    a = _t(a)
    if a.ndim != 2:
        raise ShapeError("row_sum expects a matrix")
    out = a.data.sum(axis=0)

    def vjp(g):
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(out, (a,), vjp)


def row_mean(a) -> Tensor:
    a = _t(a)
    if a.ndim != 2:
        raise ShapeError("row_mean expects a matrix")
    n = a.shape[0]
    out = a.data.mean(axis=0)

    def vjp(g):
        return (np.broadcast_to(g / n, a.shape).copy(),)

    return _make(out, (a,), vjp)


def sum_all(a) -> Tensor:
    a = _t(a)
    out = np.asarray(a.data.sum())

    def vjp(g):
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(out, (a,), vjp)


def mean_all(a) -> Tensor:
    a = _t(a)
    if a.size == 0:
        raise ShapeError("mean of an empty tensor")
    n = a.size
    out = np.asarray(a.data.mean())

    def vjp(g):
        return (np.broadcast_to(g / n, a.shape).copy(),)

    return _make(out, (a,), vjp)


def segment_sum(a, segments, num_segments: int) -> Tensor:
    """Sum rows (or elements) of ``a`` grouped by segment id."""
    a = _t(a)
    segments = np.asarray(segments, dtype=np.int64)
    shape = (num_segments,) + a.shape[1:]
    out = np.zeros(shape)
    np.add.at(out, segments, a.data)

    def vjp(g):
        return (g[segments],)

    return _make(out, (a,), vjp)


# ---------------------------------------------------------------- activations

def softmax_rows(a) -> Tensor:
    """Row-wise softmax with max subtraction; rows sum to one."""
    a = _t(a)
    if a.ndim != 2:
        raise ShapeError("softmax_rows expects a matrix")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    out = ex / ex.sum(axis=1, keepdims=True)

    def vjp(g):
        dot = (out * g).sum(axis=1, keepdims=True)
        return (out * (g - dot),)

    return _make(out, (a,), vjp)


def segment_softmax(logits, segments, num_segments: int) -> Tensor:
    """Softmax over groups of a 1-D logit vector; each group sums to one."""
    logits = _t(logits)
    if logits.ndim != 1:
        raise ShapeError("segment_softmax expects a vector")
    segments = np.asarray(segments, dtype=np.int64)
    peak = np.full(num_segments, -np.inf)
    np.maximum.at(peak, segments, logits.data)
    if not np.all(np.isfinite(peak)):
        raise ShapeError("segment_softmax: every segment needs an entry")
    ex = np.exp(logits.data - peak[segments])
    denom = np.zeros(num_segments)
    np.add.at(denom, segments, ex)
    out = ex / denom[segments]

    def vjp(g):
        dot = np.zeros(num_segments)
        np.add.at(dot, segments, out * g)
        return (out * (g - dot[segments]),)

    return _make(out, (logits,), vjp)


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = _t(a)
    out = np.where(a.data > 0, a.data, slope * a.data)

    def vjp(g):
        return (np.where(a.data > 0, g, slope * g),)

    return _make(out, (a,), vjp)


def elu(a) -> Tensor:
    a = _t(a)
    out = np.where(a.data > 0, a.data, np.expm1(np.minimum(a.data, 0.0)))

    def vjp(g):
        return (np.where(a.data > 0, g, (out + 1.0) * g),)

    return _make(out, (a,), vjp)


def sigmoid(a) -> Tensor:
    a = _t(a)
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def vjp(g):
        return (out * (1.0 - out) * g,)

    return _make(out, (a,), vjp)


def abs_(a) -> Tensor:
    a = _t(a)
    out = np.abs(a.data)

    def vjp(g):
        return (np.sign(a.data) * g,)

    return _make(out, (a,), vjp)


def huber(a, delta: float) -> Tensor:
    """Elementwise Huber value: quadratic inside ``delta``, linear outside."""
    a = _t(a)
    if delta <= 0:
        raise ValueError("delta must be positive")
    absd = np.abs(a.data)
    inside = absd <= delta
    out = np.where(inside, 0.5 * a.data**2, delta * (absd - 0.5 * delta))

    def vjp(g):
        return (np.where(inside, a.data, delta * np.sign(a.data)) * g,)

    return _make(out, (a,), vjp)


# ----------------------------------------------------------------- batch norm

@dataclass
class BatchNormState:
    """Running statistics; updated in train mode, read in infer mode."""

    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @classmethod
    def fresh(cls, width: int, momentum: float = 0.1, eps: float = 1e-5):
        return cls(np.zeros(width), np.ones(width), momentum, eps)

    def copy(self) -> "BatchNormState":
        return BatchNormState(self.running_mean.copy(), self.running_var.copy(),
                              self.momentum, self.eps)


def batch_norm(x, gamma, beta, state: BatchNormState, mode: str = "train") -> Tensor:
    """Feature-wise normalization over the batch axis of a (B, F) matrix."""
    x, gamma, beta = _t(x), _t(gamma), _t(beta)
    if x.ndim != 2:
        raise ShapeError("batch_norm expects a (B, F) matrix")
    if mode not in ("train", "infer"):
        raise ValueError(f"unknown batch_norm mode {mode!r}")
    eps = state.eps

    if mode == "infer":
        inv = 1.0 / np.sqrt(state.running_var + eps)
        xhat = (x.data - state.running_mean) * inv
        out = gamma.data * xhat + beta.data

        def vjp(g):
            return (
                g * gamma.data * inv,
                (g * xhat).sum(axis=0),
                g.sum(axis=0),
            )

        return _make(out, (x, gamma, beta), vjp)

    b = x.shape[0]
    if b < 2:
        raise ShapeError("batch_norm train mode needs a batch of at least 2")
    mean = x.data.mean(axis=0)
    var = x.data.var(axis=0)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv
    out = gamma.data * xhat + beta.data

    m = state.momentum
    state.running_mean = (1 - m) * state.running_mean + m * mean
    state.running_var = (1 - m) * state.running_var + m * var * b / max(b - 1, 1)

    def vjp(g):
        dxhat = g * gamma.data
        dx = (inv / b) * (
            b * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
        )
        return dx, (g * xhat).sum(axis=0), g.sum(axis=0)

    return _make(out, (x, gamma, beta), vjp)
