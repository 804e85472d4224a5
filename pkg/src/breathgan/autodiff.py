"""Minimal reverse-mode autodiff over dense float64 arrays.

Tensors form an acyclic graph; calling backward() on a scalar loss
accumulates gradients into every reachable tensor created with
requires_grad=True.  Broadcasting is limited to what the network code
needs: scalars and row-vector biases against matrices.  A graph must be
backpropagated before its leaf parameters are mutated in place.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

BCE_EPS = 1e-7  # probability clamp keeping log() finite during early training

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph construction inside the block (pure sampling paths)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = _grad_enabled and (
            requires_grad or any(p.requires_grad for p in _parents))
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
        else:
            self.grad = self.grad + g

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        topo: list[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __sub__(self, other):
        return add(self, mul(_lift(other), _lift(-1.0)))

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    if g.shape == shape:
        return g
    if shape == () or shape == (1,):
        return g.sum().reshape(shape)
    # row vector (n,) or (1, n) against (m, n)
    g = g.sum(axis=0)
    return g.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data
    out = Tensor(data, _parents=(a, b))
    if out.requires_grad:
        def _backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g, b.data.shape))
        out._backward = _backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data
    out = Tensor(data, _parents=(a, b))
    if out.requires_grad:
        def _backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.data.shape))
        out._backward = _backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data, _parents=(a, b))
    if out.requires_grad:
        def _backward(g):
            if a.requires_grad:
                a._accumulate(g @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ g)
        out._backward = _backward
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-x.data))
    out = Tensor(s, _parents=(x,))
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(g * s * (1.0 - s))
    return out


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    out = Tensor(t, _parents=(x,))
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(g * (1.0 - t * t))
    return out


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0.0), _parents=(x,))
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(g * (x.data > 0.0))
    return out


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis),
                 _parents=tuple(tensors))
    if out.requires_grad:
        sizes = [t.data.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)
        def _backward(g):
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    idx = [slice(None)] * g.ndim
                    idx[axis] = slice(lo, hi)
                    t._accumulate(g[tuple(idx)])
        out._backward = _backward
    return out


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    out = Tensor(x.data[:, start:stop], _parents=(x,))
    if out.requires_grad:
        def _backward(g):
            full = np.zeros_like(x.data)
            full[:, start:stop] = g
            x._accumulate(full)
        out._backward = _backward
    return out


def mean(x: Tensor) -> Tensor:
    out = Tensor(x.data.mean(), _parents=(x,))
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(
            np.full_like(x.data, float(g) / x.data.size))
    return out


def tsum(x: Tensor) -> Tensor:
    out = Tensor(x.data.sum(), _parents=(x,))
    if out.requires_grad:
        out._backward = lambda g: x._accumulate(np.full_like(x.data, float(g)))
    return out


def bce(pred: Tensor, target: np.ndarray) -> Tensor:
    """Elementwise binary cross-entropy with probabilities clamped to
    [BCE_EPS, 1 - BCE_EPS].  Gradient is zero where the clamp is active."""
    target = np.asarray(target, dtype=np.float64)
    inside = (pred.data > BCE_EPS) & (pred.data < 1.0 - BCE_EPS)
    p = np.clip(pred.data, BCE_EPS, 1.0 - BCE_EPS)
    out = Tensor(-(target * np.log(p) + (1.0 - target) * np.log(1.0 - p)),
                 _parents=(pred,))
    if out.requires_grad:
        out._backward = lambda g: pred._accumulate(
            g * inside * (p - target) / (p * (1.0 - p)))
    return out
