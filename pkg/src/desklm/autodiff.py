"""Minimal tape-based reverse-mode autodiff over numpy arrays.

Covers exactly the op set the transformer needs. Every op works on ``Var``
nodes; :func:`differentiable` lets model-level functions also accept and
return plain arrays.
"""

from __future__ import annotations

import contextlib
import dataclasses
import functools
from typing import Callable, Sequence

import numpy as np

_GRAD_ENABLED = [True]


@contextlib.contextmanager
def no_grad():
    prev = _GRAD_ENABLED[0]
    _GRAD_ENABLED[0] = False
    try:
        yield
    finally:
        _GRAD_ENABLED[0] = prev


class Var:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Var, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def T(self) -> "Var":
        return transpose(self, tuple(range(self.data.ndim))[::-1])

    def __repr__(self):
        return f"Var(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def zero_grad(self):
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            grad = np.ones_like(self.data)
        order: list[Var] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        grads: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(np.asarray(x))


def _node(data: np.ndarray, parents: Sequence[Var], backward) -> Var:
    out = Var(data)
    if _GRAD_ENABLED[0] and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _contains_var(obj) -> bool:
    if isinstance(obj, Var):
        return True
    if isinstance(obj, (list, tuple)):
        return any(_contains_var(o) for o in obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return any(_contains_var(getattr(obj, f.name)) for f in dataclasses.fields(obj))
    return False


def differentiable(fn):
    """Wrap array arguments as constants and unwrap the result if no input holds a Var."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        if _contains_var(args) or _contains_var(tuple(kwargs.values())):
            return fn(*args, **kwargs)
        with no_grad():
            out = fn(*args, **kwargs)
        return out.data if isinstance(out, Var) else out

    return wrapper


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# elementwise ---------------------------------------------------------------

def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return _node(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return _node(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def scale(a, c: float) -> Var:
    a = as_var(a)
    return _node(a.data * c, (a,), lambda g: (g * c,))


def silu(a) -> Var:
    a = as_var(a)
    sig = 1.0 / (1.0 + np.exp(-a.data))
    return _node(a.data * sig, (a,), lambda g: (g * sig * (1.0 + a.data * (1.0 - sig)),))


# shape ---------------------------------------------------------------------

def reshape(a, shape) -> Var:
    a = as_var(a)
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes) -> Var:
    a = as_var(a)
    inv = np.argsort(axes)
    return _node(a.data.transpose(axes), (a,), lambda g: (g.transpose(inv),))


def concat(parts: Sequence, axis: int) -> Var:
    parts = [as_var(p) for p in parts]
    sizes = np.cumsum([p.shape[axis] for p in parts])[:-1]
    return _node(np.concatenate([p.data for p in parts], axis=axis), parts,
                 lambda g: tuple(np.split(g, sizes, axis=axis)))


def repeat(a, repeats: int, axis: int) -> Var:
    """``np.repeat``: each slice along ``axis`` copied ``repeats`` times in place."""
    a = as_var(a)

    def back(g):
        shp = list(a.shape)
        shp.insert(axis + 1, repeats)
        return (g.reshape(shp).sum(axis=axis + 1),)

    return _node(np.repeat(a.data, repeats, axis=axis), (a,), back)


# linear algebra ------------------------------------------------------------

def matmul(a, b) -> Var:
    a, b = as_var(a), as_var(b)

    def back(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return _node(a.data @ b.data, (a, b), back)


def embedding(weight, ids: np.ndarray) -> Var:
    weight = as_var(weight)
    ids = np.asarray(ids)

    def back(g):
        gw = np.zeros_like(weight.data)
        np.add.at(gw, ids.reshape(-1), g.reshape(-1, weight.shape[1]))
        return (gw,)

    return _node(weight.data[ids], (weight,), back)


# reductions / normalisation ------------------------------------------------

def softmax(a, axis: int = -1) -> Var:
    a = as_var(a)
    z = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / np.sum(e, axis=axis, keepdims=True)
    return _node(y, (a,), lambda g: (y * (g - np.sum(g * y, axis=axis, keepdims=True)),))


def total(a) -> Var:
    a = as_var(a)
    return _node(np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def rms_norm_literal(x, gamma, eps: float) -> Var:
    """``x * gamma / sqrt(r + eps)`` with ``r = sqrt(mean(x**2))`` over the last axis.

    The mean of squares is accumulated in float64 regardless of input dtype.
    """
    x, gamma = as_var(x), as_var(gamma)
    xd = x.data
    d = xd.shape[-1]
    ms = np.mean(np.square(xd, dtype=np.float64), axis=-1, keepdims=True)
    r = np.sqrt(ms)
    s = np.sqrt(r + eps)
    inv = (1.0 / s).astype(xd.dtype)
    xhat = xd * inv
    y = xhat * gamma.data

    def back(g):
        gx = ggamma = None
        if gamma.requires_grad:
            ggamma = _unbroadcast(g * xhat, gamma.shape)
        if x.requires_grad:
            gg = g * gamma.data
            # d(1/s)/dx = -x / (2 d r s^3); zero where r == 0 (non-differentiable point).
            with np.errstate(divide="ignore", invalid="ignore"):
                coef = np.where(r > 0, -1.0 / (2.0 * d * r * s ** 3), 0.0)
            gx = gg * inv + xd * (coef * np.sum(gg * xd, axis=-1, keepdims=True)).astype(xd.dtype)
        return gx, ggamma

    return _node(y, (x, gamma), back)


def rotate_pairs(x, cos: np.ndarray, sin: np.ndarray) -> Var:
    """Rotate interleaved feature pairs ``(x[2i], x[2i+1])`` by the given cos/sin.

    ``cos``/``sin`` broadcast against ``x[..., ::2]``.
    """
    x = as_var(x)

    def rot(data, c, s):
        even, odd = data[..., 0::2], data[..., 1::2]
        out = np.empty_like(data)
        out[..., 0::2] = even * c - odd * s
        out[..., 1::2] = even * s + odd * c
        return out

    return _node(rot(x.data, cos, sin), (x,), lambda g: (rot(g, cos, -sin),))


def cross_entropy(logits, targets: np.ndarray) -> Var:
    """Mean over positions of ``-log softmax(logits)[target]``; logits are ``[..., V]``."""
    logits = as_var(logits)
    targets = np.asarray(targets)
    flat = logits.data.reshape(-1, logits.shape[-1])
    t = targets.reshape(-1)
    z = flat - flat.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    n = t.size
    loss = np.mean(lse - z[np.arange(n), t])

    def back(g):
        p = np.exp(z - lse[:, None])
        p[np.arange(n), t] -= 1.0
        return ((g / n) * p.reshape(logits.shape),)

    return _node(np.asarray(loss, dtype=flat.dtype), (logits,), back)
