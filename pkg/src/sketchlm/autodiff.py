"""Tape-based reverse-mode automatic differentiation over numpy arrays.

Small on purpose: just the operations the transformer needs, each a function
building one graph node with a backward closure.  Gradients accumulate into
`.grad` by out-of-place addition, so backward closures must never mutate the
gradient arrays they receive.
"""

from __future__ import annotations

import math

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "parents", "needs_grad", "_backward")

    def __init__(self, data: np.ndarray, parents=(), needs_grad=None):
        self.data = data
        self.grad = None
        self.parents = parents
        if needs_grad is None:
            needs_grad = any(p.needs_grad for p in parents)
        self.needs_grad = needs_grad
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, needs_grad={self.needs_grad})"

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def param(data: np.ndarray) -> Tensor:
    return Tensor(data, needs_grad=True)


def constant(data) -> Tensor:
    return Tensor(np.asarray(data), needs_grad=False)


def _coerce(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype), needs_grad=False)


def _acc(t: Tensor, g: np.ndarray):
    if not t.needs_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, (gs, ss) in enumerate(zip(g.shape, shape)):
        if ss == 1 and gs != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a: Tensor, b) -> Tensor:
    b = _coerce(b, a)
    out = Tensor(a.data + b.data, (a, b))
    if out.needs_grad:
        def backward():
            _acc(a, _unbroadcast(out.grad, a.data.shape))
            _acc(b, _unbroadcast(out.grad, b.data.shape))
        out._backward = backward
    return out


def mul(a: Tensor, b) -> Tensor:
    b = _coerce(b, a)
    out = Tensor(a.data * b.data, (a, b))
    if out.needs_grad:
        def backward():
            _acc(a, _unbroadcast(out.grad * b.data, a.data.shape))
            _acc(b, _unbroadcast(out.grad * a.data, b.data.shape))
        out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    assert a.data.ndim >= 2 and b.data.ndim >= 2, "matmul operands must be >= 2-D"
    out = Tensor(a.data @ b.data, (a, b))
    if out.needs_grad:
        def backward():
            g = out.grad
            _acc(a, _unbroadcast(g @ b.data.swapaxes(-1, -2), a.data.shape))
            _acc(b, _unbroadcast(a.data.swapaxes(-1, -2) @ g, b.data.shape))
        out._backward = backward
    return out


def reshape(a: Tensor, shape) -> Tensor:
    old = a.data.shape
    out = Tensor(a.data.reshape(shape), (a,))
    if out.needs_grad:
        def backward():
            _acc(a, out.grad.reshape(old))
        out._backward = backward
    return out


def transpose(a: Tensor, axes) -> Tensor:
    inverse = np.argsort(axes)
    out = Tensor(a.data.transpose(axes), (a,))
    if out.needs_grad:
        def backward():
            _acc(a, out.grad.transpose(inverse))
        out._backward = backward
    return out


def take_rows(a: Tensor, idx) -> Tensor:
    """Gather rows along axis 0; backward scatter-adds (duplicates welcome)."""
    idx = np.asarray(idx)
    out = Tensor(a.data[idx], (a,))
    if out.needs_grad:
        def backward():
            g = np.zeros_like(a.data)
            np.add.at(g, idx, out.grad)
            _acc(a, g)
        out._backward = backward
    return out


def scatter_rows(rows: Tensor, idx, length: int) -> Tensor:
    """Rows placed at the given axis-0 positions of an otherwise-zero tensor."""
    idx = np.asarray(idx)
    data = np.zeros((length, *rows.data.shape[1:]), dtype=rows.data.dtype)
    data[idx] = rows.data
    out = Tensor(data, (rows,))
    if out.needs_grad:
        def backward():
            _acc(rows, out.grad[idx])
        out._backward = backward
    return out


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis), tuple(parts))
    if out.needs_grad:
        sizes = [p.data.shape[axis] for p in parts]
        def backward():
            offset = 0
            for p, size in zip(parts, sizes):
                sl = [slice(None)] * out.grad.ndim
                sl[axis] = slice(offset, offset + size)
                _acc(p, out.grad[tuple(sl)])
                offset += size
        out._backward = backward
    return out


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y, (a,))
    if out.needs_grad:
        def backward():
            g = out.grad
            _acc(a, y * (g - (g * y).sum(axis=-1, keepdims=True)))
        out._backward = backward
    return out


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a: Tensor) -> Tensor:
    """tanh-approximation GELU (smooth, finite-difference friendly)."""
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    out = Tensor(0.5 * x * (1.0 + t), (a,))
    if out.needs_grad:
        def backward():
            d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * x**2)
            _acc(a, out.grad * d)
        out._backward = backward
    return out


LN_EPS = 1e-5


def layernorm(a: Tensor, gain: Tensor, bias: Tensor) -> Tensor:
    """Layer norm over the last axis with learnable gain/bias."""
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    out = Tensor(xhat * gain.data + bias.data, (a, gain, bias))
    if out.needs_grad:
        def backward():
            g = out.grad
            reduce_axes = tuple(range(g.ndim - 1))
            _acc(gain, (g * xhat).sum(axis=reduce_axes))
            _acc(bias, g.sum(axis=reduce_axes))
            dxhat = g * gain.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            _acc(a, inv * (dxhat - m1 - xhat * m2))
        out._backward = backward
    return out


def masked_cross_entropy(logits: Tensor, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean cross-entropy over rows where mask is set; rows align 1:1."""
    targets = np.asarray(targets)
    maskf = np.asarray(mask, dtype=logits.data.dtype)
    n = maskf.sum()
    if n <= 0:
        raise ValueError("mask selects no rows")
    x = logits.data
    m = x.max(axis=-1, keepdims=True)
    z = x - m
    lse = np.log(np.exp(z).sum(axis=-1)) + m[:, 0]
    rows = np.arange(x.shape[0])
    nll = lse - x[rows, targets]
    loss = (nll * maskf).sum() / n
    out = Tensor(np.asarray(loss, dtype=x.dtype), (logits,))
    if out.needs_grad:
        def backward():
            p = np.exp(z)
            p /= p.sum(axis=-1, keepdims=True)
            p[rows, targets] -= 1.0
            p *= (maskf / n)[:, None]
            _acc(logits, p * out.grad)
        out._backward = backward
    return out


def sigmoid_bce(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean binary cross-entropy on logits (numerically stable form)."""
    x = logits.data
    y = np.asarray(targets, dtype=x.dtype)
    loss = np.maximum(x, 0) - x * y + np.log1p(np.exp(-np.abs(x)))
    out = Tensor(np.asarray(loss.mean(), dtype=x.dtype), (logits,))
    if out.needs_grad:
        def backward_fn():
            sig = 1.0 / (1.0 + np.exp(-x))
            _acc(logits, (sig - y) * (out.grad / x.size))
        out._backward = backward_fn
    return out


def backward(root: Tensor):
    """Backpropagate from a scalar root through every grad-requiring node."""
    assert root.data.size == 1, "backward starts from a scalar"
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.needs_grad and id(p) not in visited:
                stack.append((p, False))
    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward()
