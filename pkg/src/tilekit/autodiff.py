"""Minimal reverse-mode autodiff over float32 numpy arrays.

Covers exactly the operations the tiling network and its losses need:
affine/matmul, per-edge matrix-vector products, leaky ReLU, sigmoid, log,
clamp, elementwise arithmetic, concat, row gather/scatter, and reductions.
Accumulation order is fixed (graph construction order), so repeated runs
are bitwise reproducible.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np


class NoTape(RuntimeError):
    """backward() called on a value with no recorded computation graph."""


_grad_enabled = [True]


@contextmanager
def no_grad():
    _grad_enabled.append(False)
    try:
        yield
    finally:
        _grad_enabled.pop()


def grad_enabled() -> bool:
    return _grad_enabled[-1]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False, _parents=(), _backward_fn=None):
        self.data = np.asarray(data, dtype=np.float32)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward_fn = _backward_fn

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Reverse-mode sweep from this (scalar) tensor."""
        if not self._parents and not self.requires_grad:
            raise NoTape("no computation graph recorded for this tensor")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward_fn is not None:
                node._backward_fn()

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.grad is not None})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)


def tensor(data, requires_grad=False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))


def _track(*tensors) -> bool:
    return grad_enabled() and any(t.requires_grad or t._parents for t in tensors)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.astype(np.float32, copy=False)


def _make(data, parents, backward_fn):
    if parents is None:
        return Tensor(data)
    return Tensor(data, _parents=parents, _backward_fn=backward_fn)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data
    if not _track(a, b):
        return Tensor(out_data)
    out = Tensor(out_data, _parents=(a, b))

    def backward():
        a._accumulate(_unbroadcast(out.grad, a.data.shape))
        b._accumulate(_unbroadcast(out.grad, b.data.shape))
    out._backward_fn = backward
    return out


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data
    if not _track(a, b):
        return Tensor(out_data)
    out = Tensor(out_data, _parents=(a, b))

    def backward():
        a._accumulate(_unbroadcast(out.grad * b.data, a.data.shape))
        b._accumulate(_unbroadcast(out.grad * a.data, b.data.shape))
    out._backward_fn = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data @ b.data
    if not _track(a, b):
        return Tensor(out_data)
    out = Tensor(out_data, _parents=(a, b))

    def backward():
        a._accumulate(out.grad @ b.data.T)
        b._accumulate(a.data.T @ out.grad)
    out._backward_fn = backward
    return out


def bmm_vec(x: Tensor, w: Tensor) -> Tensor:
    """Per-row matrix-vector product: (E, C) x (E, C, D) -> (E, D)."""
    out_data = np.einsum("ec,ecd->ed", x.data, w.data)
    if not _track(x, w):
        return Tensor(out_data)
    out = Tensor(out_data, _parents=(x, w))

    def backward():
        x._accumulate(np.einsum("ed,ecd->ec", out.grad, w.data))
        w._accumulate(np.einsum("ec,ed->ecd", x.data, out.grad))
    out._backward_fn = backward
    return out


def leaky_relu(x: Tensor, slope: float = 0.01) -> Tensor:
    neg = x.data < 0
    out_data = np.where(neg, x.data * np.float32(slope), x.data)
    if not _track(x):
        return Tensor(out_data)
    out = Tensor(out_data, _parents=(x,))

    def backward():
        x._accumulate(np.where(neg, out.grad * np.float32(slope), out.grad))
    out._backward_fn = backward
    return out


def sigmoid(x: Tensor) -> Tensor:
    z = x.data
    out_data = np.empty_like(z)
    pos = z >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out_data[~pos] = ez / (1.0 + ez)
    if not _track(x):
        return Tensor(out_data)
    out = Tensor(out_data, _parents=(x,))

    def backward():
        # derivative from the input, not out*(1-out): float32 sigmoid
        # saturates to exactly 0/1 near |z| ~ 17, which would freeze
        # saturated units permanently; exp(-|z|) stays nonzero to |z| ~ 87
        e = np.exp(-np.abs(z))
        x._accumulate(out.grad * (e / (1.0 + e) ** 2))
    out._backward_fn = backward
    return out


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)
    if not _track(x):
        return Tensor(out_data)
    out = Tensor(out_data, _parents=(x,))

    def backward():
        x._accumulate(out.grad * (1.0 - out.data * out.data))
    out._backward_fn = backward
    return out


def log(x: Tensor) -> Tensor:
    out_data = np.log(x.data)
    if not _track(x):
        return Tensor(out_data)
    out = Tensor(out_data, _parents=(x,))

    def backward():
        x._accumulate(out.grad / x.data)
    out._backward_fn = backward
    return out


def clamp(x: Tensor, lo: float | None = None, hi: float | None = None) -> Tensor:
    out_data = np.clip(x.data, lo, hi)
    if not _track(x):
        return Tensor(out_data)
    passthrough = np.ones_like(x.data, dtype=bool)
    if lo is not None:
        passthrough &= x.data > lo
    if hi is not None:
        passthrough &= x.data < hi
    out = Tensor(out_data, _parents=(x,))

    def backward():
        x._accumulate(np.where(passthrough, out.grad, 0.0))
    out._backward_fn = backward
    return out


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    if not _track(*tensors):
        return Tensor(out_data)
    out = Tensor(out_data, _parents=tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward():
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * out.grad.ndim
            sl[axis] = slice(start, stop)
            t._accumulate(out.grad[tuple(sl)])
    out._backward_fn = backward
    return out


def gather_rows(x: Tensor, index: np.ndarray) -> Tensor:
    index = np.asarray(index, dtype=np.int64)
    out_data = x.data[index]
    if not _track(x):
        return Tensor(out_data)
    out = Tensor(out_data, _parents=(x,))

    def backward():
        g = np.zeros_like(x.data)
        np.add.at(g, index, out.grad)
        x._accumulate(g)
    out._backward_fn = backward
    return out


def scatter_rows(x: Tensor, index: np.ndarray, size: int) -> Tensor:
    """Sum rows of x into a (size, ...) array at the given indices."""
    index = np.asarray(index, dtype=np.int64)
    out_data = np.zeros((size,) + x.data.shape[1:], dtype=np.float32)
    np.add.at(out_data, index, x.data)
    if not _track(x):
        return Tensor(out_data)
    out = Tensor(out_data, _parents=(x,))

    def backward():
        x._accumulate(out.grad[index])
    out._backward_fn = backward
    return out


def reduce_sum(x: Tensor) -> Tensor:
    out_data = np.float32(x.data.sum())
    if not _track(x):
        return Tensor(out_data)
    out = Tensor(out_data, _parents=(x,))

    def backward():
        x._accumulate(np.full_like(x.data, out.grad))
    out._backward_fn = backward
    return out


def reduce_mean(x: Tensor) -> Tensor:
    n = x.data.size
    return mul(reduce_sum(x), 1.0 / n)


def reshape(x: Tensor, shape) -> Tensor:
    out_data = x.data.reshape(shape)
    if not _track(x):
        return Tensor(out_data)
    out = Tensor(out_data, _parents=(x,))

    def backward():
        x._accumulate(out.grad.reshape(x.data.shape))
    out._backward_fn = backward
    return out
