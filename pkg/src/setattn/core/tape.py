"""Reverse-mode differentiation over matrix-level primitives.

A :class:`Tape` records every primitive applied to :class:`Node` values.
``backward`` replays the records in reverse, so each node is visited once.
Recording can be switched off for inference; the forward values are the
same either way.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


class TapeError(RuntimeError):
    pass


class Node:
    __slots__ = ("value", "tape", "index")

    def __init__(self, value, tape, index):
        self.value = value
        self.tape = tape
        self.index = index

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(shape={self.value.shape}, index={self.index})"

    def _lift(self, other):
        if isinstance(other, Node):
            return other
        return self.tape.const(other)

    def __add__(self, other):
        return add(self, self._lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, self._lift(other))

    def __rsub__(self, other):
        return sub(self._lift(other), self)

    def __mul__(self, other):
        return mul(self, self._lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, self._lift(other))


class Tape:
    """Records primitive operations for one forward pass.

    Parameters are registered by name with :meth:`param`; ``backward``
    returns a gradient for every registered parameter, including exact zeros
    for parameters the loss never touched.
    """

    def __init__(self, record=True):
        self.record = record
        self._records = []  # (out_index, parent_indices, backward_fn)
        self._count = 0
        self.params = {}  # name -> Node

    def _new(self, value):
        node = Node(value, self, self._count)
        self._count += 1
        return node

    def param(self, name, value):
        if name in self.params:
            return self.params[name]
        node = self._new(np.asarray(value, dtype=np.float64))
        self.params[name] = node
        return node

    def const(self, value):
        return self._new(np.asarray(value, dtype=np.float64))

    def emit(self, value, parents, backward_fn):
        node = self._new(value)
        if self.record:
            for p in parents:
                if p.tape is not self:
                    raise TapeError("operands belong to a different tape")
            self._records.append((node.index, tuple(p.index for p in parents), backward_fn))
        return node

    def __len__(self):
        return len(self._records)


def backward(tape: Tape, loss: Node) -> dict:
    """Gradients of scalar ``loss`` with respect to every registered parameter."""
    if not tape.record:
        raise TapeError("tape was created with record=False")
    if loss.tape is not tape or loss.index >= tape._count:
        raise TapeError("loss is not on this tape")
    if loss.value.size != 1:
        raise ShapeError(f"loss must be scalar, got shape {loss.value.shape}")
    grads = {loss.index: np.ones_like(loss.value)}
    for out_index, parents, fn in reversed(tape._records):
        g = grads.pop(out_index, None)
        if g is None:
            continue
        for idx, pg in zip(parents, fn(g)):
            if pg is None:
                continue
            if idx in grads:
                grads[idx] = grads[idx] + pg
            else:
                grads[idx] = pg
    out = {}
    for name, node in tape.params.items():
        g = grads.get(node.index)
        out[name] = np.zeros_like(node.value) if g is None else g
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- primitives --------------------------------------------------------------

def matmul(a: Node, b: Node) -> Node:
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(f"matmul shapes {a.value.shape} and {b.value.shape} do not agree")
    av, bv = a.value, b.value
    return a.tape.emit(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def affine(x: Node, w: Node, b: Node) -> Node:
    """``x @ w + b`` with ``b`` a 1×h row broadcast over rows."""
    xv, wv, bv = x.value, w.value, b.value
    if xv.ndim != 2 or wv.ndim != 2 or xv.shape[1] != wv.shape[0]:
        raise ShapeError(f"affine: input {xv.shape} incompatible with weight {wv.shape}")
    if bv.shape != (1, wv.shape[1]):
        raise ShapeError(f"affine: bias shape {bv.shape}, expected (1, {wv.shape[1]})")

    def grad(g):
        return g @ wv.T, xv.T @ g, g.sum(axis=0, keepdims=True)

    return x.tape.emit(xv @ wv + bv, (x, w, b), grad)


def add(a: Node, b: Node) -> Node:
    sa, sb = a.value.shape, b.value.shape
    return a.tape.emit(a.value + b.value, (a, b),
                       lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a: Node, b: Node) -> Node:
    sa, sb = a.value.shape, b.value.shape
    return a.tape.emit(a.value - b.value, (a, b),
                       lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a: Node, b: Node) -> Node:
    av, bv = a.value, b.value
    return a.tape.emit(av * bv, (a, b),
                       lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def scale(a: Node, c: float) -> Node:
    return a.tape.emit(a.value * c, (a,), lambda g: (g * c,))


def exp(a: Node) -> Node:
    out = np.exp(a.value)
    return a.tape.emit(out, (a,), lambda g: (g * out,))


def square(a: Node) -> Node:
    av = a.value
    return a.tape.emit(av * av, (a,), lambda g: (2.0 * av * g,))


def clip(a: Node, lo: float, hi: float) -> Node:
    av = a.value
    inside = (av >= lo) & (av <= hi)
    return a.tape.emit(np.clip(av, lo, hi), (a,), lambda g: (g * inside,))


def minimum(a: Node, b: Node) -> Node:
    av, bv = a.value, b.value
    take_a = av <= bv
    return a.tape.emit(np.minimum(av, bv), (a, b),
                       lambda g: (_unbroadcast(g * take_a, av.shape),
                                  _unbroadcast(g * ~take_a, bv.shape)))


def total(a: Node) -> Node:
    shape = a.value.shape
    return a.tape.emit(np.array([[a.value.sum()]]), (a,),
                       lambda g: (np.full(shape, g.item()),))


def mean(a: Node) -> Node:
    shape, n = a.value.shape, a.value.size
    return a.tape.emit(np.array([[a.value.mean()]]), (a,),
                       lambda g: (np.full(shape, g.item() / n),))


def row_sum(a: Node) -> Node:
    """Sum across columns, keeping an m×1 column."""
    shape = a.value.shape
    return a.tape.emit(a.value.sum(axis=1, keepdims=True), (a,),
                       lambda g: (np.broadcast_to(g, shape).copy(),))


def concat_cols(nodes) -> Node:
    nodes = list(nodes)
    if len(nodes) == 1:
        return nodes[0]
    rows = {n.value.shape[0] for n in nodes}
    if len(rows) != 1:
        raise ShapeError(f"concat_cols: row counts differ {sorted(rows)}")
    widths = [n.value.shape[1] for n in nodes]
    bounds = np.cumsum([0] + widths)

    def grad(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(nodes)))

    return nodes[0].tape.emit(np.concatenate([n.value for n in nodes], axis=1), nodes, grad)


ACTIVATIONS = ("relu", "leaky_relu", "identity")


def activation_values(x, kind, slope=0.01):
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "leaky_relu":
        return np.where(x >= 0.0, x, slope * x)
    if kind == "identity":
        return x
    raise ValueError(f"unknown activation {kind!r}")


def activation(a: Node, kind: str, slope: float = 0.01) -> Node:
    if kind == "identity":
        return a
    av = a.value
    if kind == "relu":
        mask = av > 0.0
        return a.tape.emit(np.where(mask, av, 0.0), (a,), lambda g: (g * mask,))
    if kind == "leaky_relu":
        factor = np.where(av >= 0.0, 1.0, slope)
        return a.tape.emit(av * factor, (a,), lambda g: (g * factor,))
    raise ValueError(f"unknown activation {kind!r}")


def segment_softmax(y: Node, segments: np.ndarray, n_segments: int) -> Node:
    """Softmax of an N×1 column within each segment.

    ``segments[i]`` names the segment of row ``i``. The per-segment max is
    subtracted before exponentiating; max does not depend on row order.
    """
    v = y.value
    if v.ndim != 2 or v.shape[1] != 1:
        raise ShapeError(f"segment_softmax expects an N×1 column, got {v.shape}")
    v = v[:, 0]
    top = np.full(n_segments, -np.inf)
    np.maximum.at(top, segments, v)
    e = np.exp(v - top[segments])
    denom = np.bincount(segments, weights=e, minlength=n_segments)
    w = e / denom[segments]

    def grad(g):
        gw = g[:, 0]
        dot = np.bincount(segments, weights=gw * w, minlength=n_segments)
        return ((w * (gw - dot[segments]))[:, None],)

    return y.tape.emit(w[:, None], (y,), grad)


def segment_sum(x: Node, segments: np.ndarray, n_segments: int) -> Node:
    """Row sums grouped by segment; empty segments yield zero rows."""
    xv = x.value
    out = np.zeros((n_segments, xv.shape[1]))
    np.add.at(out, segments, xv)
    return x.tape.emit(out, (x,), lambda g: (g[segments],))


def softmax_column(y) -> np.ndarray:
    """Stable softmax of a 1-D vector."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.size == 0:
        raise ValueError("softmax of an empty vector is undefined")
    if not np.all(np.isfinite(y)):
        raise ValueError("softmax input must be finite")
    e = np.exp(y - y.max())
    return e / e.sum()
