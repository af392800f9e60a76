"""Tiny reverse-mode automatic differentiation over numpy arrays.

Only the operations the recurrent sentiment model needs are provided:
elementwise arithmetic, matrix-vector products, the usual squashing
functions, concatenation/stacking and a softmax/log pair for cross-entropy.
Gradients flow through a dynamically built tape of ``Var`` nodes; call
``backward`` on a scalar output and read ``.grad`` off the leaves.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Var",
    "add",
    "sub",
    "mul",
    "matvec",
    "dot",
    "tanh",
    "sigmoid",
    "concat",
    "stack",
    "softmax",
    "log",
    "index",
    "backward",
]


class Var:
    """One tape node: a value, its parents, and a vector-Jacobian product."""

    __slots__ = ("value", "grad", "parents", "vjp")

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.vjp = vjp


def _lift(x):
    return x if isinstance(x, Var) else Var(x)


def add(a, b):
    a, b = _lift(a), _lift(b)
    return Var(a.value + b.value, (a, b), lambda g: (_unbroadcast(g, a.value), _unbroadcast(g, b.value)))


def sub(a, b):
    a, b = _lift(a), _lift(b)
    return Var(a.value - b.value, (a, b), lambda g: (_unbroadcast(g, a.value), _unbroadcast(-g, b.value)))


def _unbroadcast(g, ref):
    # only scalar-vs-array broadcasting occurs here
    if np.ndim(ref) == 0:
        return np.sum(g)
    return g


def mul(a, b):
    a, b = _lift(a), _lift(b)
    return Var(
        a.value * b.value,
        (a, b),
        lambda g: (_unbroadcast(g * b.value, a.value), _unbroadcast(g * a.value, b.value)),
    )


def matvec(W, x):
    """2-D W times 1-D x."""
    W, x = _lift(W), _lift(x)
    if W.value.ndim != 2 or x.value.ndim != 1:
        raise ValueError(f"matvec expects 2-D @ 1-D, got {W.value.shape} @ {x.value.shape}")
    return Var(
        W.value @ x.value,
        (W, x),
        lambda g: (np.outer(g, x.value), W.value.T @ g),
    )


def dot(a, b):
    a, b = _lift(a), _lift(b)
    return Var(a.value @ b.value, (a, b), lambda g: (g * b.value, g * a.value))


def tanh(a):
    a = _lift(a)
    t = np.tanh(a.value)
    return Var(t, (a,), lambda g: (g * (1.0 - t * t),))


def sigmoid(a):
    a = _lift(a)
    v = a.value
    s = np.empty_like(np.asarray(v, dtype=np.float64))
    pos = v >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ex = np.exp(v[~pos])
    s[~pos] = ex / (1.0 + ex)
    return Var(s, (a,), lambda g: (g * s * (1.0 - s),))


def concat(parts):
    parts = [_lift(p) for p in parts]
    sizes = [p.value.size for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits))

    return Var(np.concatenate([p.value for p in parts]), tuple(parts), vjp)


def stack(scalars):
    """1-D vector out of scalar nodes."""
    scalars = [_lift(s) for s in scalars]

    def vjp(g):
        return tuple(g[i] for i in range(len(scalars)))

    return Var(np.array([float(s.value) for s in scalars]), tuple(scalars), vjp)


def softmax(a):
    a = _lift(a)
    shifted = a.value - a.value.max()
    e = np.exp(shifted)
    p = e / e.sum()
    return Var(p, (a,), lambda g: (p * (g - float(g @ p)),))


def log(a):
    a = _lift(a)
    return Var(np.log(a.value), (a,), lambda g: (g / a.value,))


def index(a, i):
    a = _lift(a)

    def vjp(g):
        out = np.zeros_like(a.value)
        out[i] = g
        return (out,)

    return Var(a.value[i], (a,), vjp)


def backward(root):
    """Accumulate gradients of the scalar ``root`` into every tape node."""
    if np.ndim(root.value) != 0:
        raise ValueError("backward requires a scalar output")
    order = []
    seen = set()
    stack_ = [(root, False)]
    while stack_:
        node, done = stack_.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node.parents:
            stack_.append((p, False))
    for node in order:
        node.grad = np.zeros_like(node.value)
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node.vjp is None:
            continue
        for parent, g in zip(node.parents, node.vjp(node.grad)):
            parent.grad = parent.grad + g
