"""Minimal reverse-mode automatic differentiation over numpy float64 arrays.

Just the stencil of operations the expansion model needs: affine maps,
GRU gate nonlinearities, attention reductions, and log-softmax losses.
Gradients are checked against central finite differences in the tests;
everything is deterministic.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "parents", "backward_fn")

    def __init__(self, data, parents=(), backward_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn

    @property
    def shape(self):
        return self.data.shape


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum out axes that numpy broadcasting added or expanded."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, (a, b))
    out.backward_fn = lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, (a, b))
    out.backward_fn = lambda g: (
        _unbroadcast(g * b.data, a.shape),
        _unbroadcast(g * a.data, b.shape),
    )
    return out


def scale_add(x: Tensor, a=1.0, b=0.0) -> Tensor:
    """a * x + b with constant (non-differentiated) a, b."""
    a = np.asarray(a, dtype=np.float64)
    out = Tensor(a * x.data + b, (x,))
    out.backward_fn = lambda g: (_unbroadcast(g * a, x.shape),)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(np.matmul(a.data, b.data), (a, b))

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    out.backward_fn = backward
    return out


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    out = Tensor(y, (x,))
    out.backward_fn = lambda g: (g * (1.0 - y * y),)
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-x.data))
    out = Tensor(y, (x,))
    out.backward_fn = lambda g: (g * y * (1.0 - y),)
    return out


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]

    def backward(g):
        return tuple(np.split(g, np.cumsum(sizes)[:-1], axis=axis))

    out.backward_fn = backward
    return out


def stack(tensors: list[Tensor], axis: int = 1) -> Tensor:
    out = Tensor(np.stack([t.data for t in tensors], axis=axis), tuple(tensors))

    def backward(g):
        parts = np.split(g, len(tensors), axis=axis)
        return tuple(np.squeeze(p, axis=axis) for p in parts)

    out.backward_fn = backward
    return out


def reshape(x: Tensor, shape: tuple) -> Tensor:
    out = Tensor(x.data.reshape(shape), (x,))
    out.backward_fn = lambda g: (g.reshape(x.shape),)
    return out


def softmax(x: Tensor) -> Tensor:
    m = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(m)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s, (x,))
    out.backward_fn = lambda g: (s * (g - (g * s).sum(axis=-1, keepdims=True)),)
    return out


def log_softmax(x: Tensor) -> Tensor:
    m = x.data - x.data.max(axis=-1, keepdims=True)
    lsm = m - np.log(np.exp(m).sum(axis=-1, keepdims=True))
    out = Tensor(lsm, (x,))
    out.backward_fn = lambda g: (g - np.exp(lsm) * g.sum(axis=-1, keepdims=True),)
    return out


def embed_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    out = Tensor(table.data[ids], (table,))

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    out.backward_fn = backward
    return out


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """Pick x[i, idx[i]] for each row i."""
    rows = np.arange(x.data.shape[0])
    out = Tensor(x.data[rows, idx], (x,))

    def backward(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (rows, idx), g)
        return (gx,)

    out.backward_fn = backward
    return out


def gather_time(x: Tensor, idx: np.ndarray) -> Tensor:
    """Pick x[i, idx[i], :] from a (B, T, H) tensor."""
    rows = np.arange(x.data.shape[0])
    out = Tensor(x.data[rows, idx, :], (x,))

    def backward(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (rows, idx), g)
        return (gx,)

    out.backward_fn = backward
    return out


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(x.data.sum(), (x,))
    out.backward_fn = lambda g: (np.full(x.shape, g),)
    return out


def backward(loss: Tensor) -> None:
    """Accumulate gradients of `loss` (a scalar) into every reachable tensor."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack_ = [loss]
    while stack_:
        node = stack_[-1]
        if id(node) in seen:
            stack_.pop()
            continue
        pending = [p for p in node.parents if id(p) not in seen]
        if pending:
            stack_.extend(pending)
            continue
        seen.add(id(node))
        order.append(node)
        stack_.pop()

    for node in order:
        node.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node.backward_fn is None or node.grad is None:
            continue
        for parent, g in zip(node.parents, node.backward_fn(node.grad)):
            if parent.grad is None:
                parent.grad = g.copy()
            else:
                parent.grad += g
