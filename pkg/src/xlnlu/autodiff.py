"""Reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Tape` records primitive operations in topological order; each
record keeps its forward value and a vector-Jacobian product closure.
``backward`` replays the tape in reverse, accumulating adjoints.

Everything is float64: finite-difference gradient verification (the test
suite leans on it heavily) is unreliable in single precision.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import NumericError

Array = np.ndarray


def _as_array(x) -> Array:
    a = np.asarray(x, dtype=np.float64)
    return a


def _unbroadcast(grad: Array, shape: tuple) -> Array:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    # sum over leading dims added by broadcasting
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad.reshape(shape)


class _Record:
    __slots__ = ("op", "parents", "value", "vjp")

    def __init__(self, op: str, parents: tuple, value: Array,
                 vjp: Callable[[Array], Sequence[Array]] | None):
        self.op = op
        self.parents = parents
        self.value = value
        self.vjp = vjp


class Node:
    """Handle to one tape record. Cheap to copy; all state lives on the tape."""

    __slots__ = ("tape", "idx")

    def __init__(self, tape: "Tape", idx: int):
        self.tape = tape
        self.idx = idx

    @property
    def value(self) -> Array:
        return self.tape.nodes[self.idx].value

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def _lift(self, other) -> "Node":
        if isinstance(other, Node):
            return other
        return self.tape.constant(other)

    def __add__(self, other):
        return self.tape.add(self, self._lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.tape.sub(self, self._lift(other))

    def __rsub__(self, other):
        return self.tape.sub(self._lift(other), self)

    def __mul__(self, other):
        return self.tape.mul(self, self._lift(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return self.tape.matmul(self, self._lift(other))

    def __neg__(self):
        return self.tape.scale(self, -1.0)


class Tape:
    """Append-only operation log; a DAG in construction (topological) order."""

    def __init__(self):
        self.nodes: list[_Record] = []

    # ------------------------------------------------------------------ leaves

    def _push(self, op, parents, value, vjp) -> Node:
        self.nodes.append(_Record(op, parents, value, vjp))
        return Node(self, len(self.nodes) - 1)

    def leaf(self, value) -> Node:
        """Differentiable input (a trainable parameter)."""
        return self._push("leaf", (), _as_array(value), None)

    def constant(self, value) -> Node:
        """Non-differentiable input; backward never flows into it."""
        return self._push("const", (), _as_array(value), None)

    # -------------------------------------------------------------- arithmetic

    def add(self, a: Node, b: Node) -> Node:
        va, vb = a.value, b.value
        out = va + vb
        sa, sb = va.shape, vb.shape

        def vjp(g):
            return (_unbroadcast(g, sa), _unbroadcast(g, sb))

        return self._push("add", (a.idx, b.idx), out, vjp)

    def sub(self, a: Node, b: Node) -> Node:
        va, vb = a.value, b.value
        sa, sb = va.shape, vb.shape

        def vjp(g):
            return (_unbroadcast(g, sa), _unbroadcast(-g, sb))

        return self._push("sub", (a.idx, b.idx), va - vb, vjp)

    def mul(self, a: Node, b: Node) -> Node:
        va, vb = a.value, b.value
        sa, sb = va.shape, vb.shape

        def vjp(g):
            return (_unbroadcast(g * vb, sa), _unbroadcast(g * va, sb))

        return self._push("mul", (a.idx, b.idx), va * vb, vjp)

    def scale(self, a: Node, c: float) -> Node:
        c = float(c)

        def vjp(g):
            return (g * c,)

        return self._push("scale", (a.idx,), a.value * c, vjp)

    def matmul(self, a: Node, b: Node) -> Node:
        va, vb = a.value, b.value
        if va.ndim != 2 or vb.ndim != 2:
            raise NumericError(
                f"matmul expects 2-d operands, got {va.shape} and {vb.shape}")
        if va.shape[1] != vb.shape[0]:
            raise NumericError(
                f"matmul dimension mismatch: {va.shape} x {vb.shape}")

        def vjp(g):
            return (g @ vb.T, va.T @ g)

        return self._push("matmul", (a.idx, b.idx), va @ vb, vjp)

    def transpose(self, a: Node) -> Node:
        def vjp(g):
            return (g.T,)

        return self._push("transpose", (a.idx,), a.value.T.copy(), vjp)

    def reshape(self, a: Node, shape: tuple) -> Node:
        old = a.value.shape

        def vjp(g):
            return (g.reshape(old),)

        return self._push("reshape", (a.idx,), a.value.reshape(shape).copy(), vjp)

    # ------------------------------------------------------------ elementwise

    def tanh(self, a: Node) -> Node:
        out = np.tanh(a.value)

        def vjp(g):
            return (g * (1.0 - out * out),)

        return self._push("tanh", (a.idx,), out, vjp)

    def sigmoid(self, a: Node) -> Node:
        v = a.value
        out = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                       np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))

        def vjp(g):
            return (g * out * (1.0 - out),)

        return self._push("sigmoid", (a.idx,), out, vjp)

    def exp(self, a: Node) -> Node:
        out = np.exp(a.value)

        def vjp(g):
            return (g * out,)

        return self._push("exp", (a.idx,), out, vjp)

    def log(self, a: Node) -> Node:
        v = a.value

        def vjp(g):
            return (g / v,)

        return self._push("log", (a.idx,), np.log(v), vjp)

    def clamp(self, a: Node, lo: float, hi: float) -> Node:
        v = a.value
        out = np.clip(v, lo, hi)
        mask = ((v >= lo) & (v <= hi)).astype(np.float64)

        def vjp(g):
            return (g * mask,)

        return self._push("clamp", (a.idx,), out, vjp)

    # -------------------------------------------------------------- reductions

    def sum(self, a: Node, axis=None, keepdims: bool = False) -> Node:
        shape = a.value.shape
        out = a.value.sum(axis=axis, keepdims=keepdims)

        def vjp(g):
            if axis is None:
                return (np.broadcast_to(g, shape).copy(),)
            gg = g if keepdims else np.expand_dims(g, axis)
            return (np.broadcast_to(gg, shape).copy(),)

        return self._push("sum", (a.idx,), np.asarray(out, dtype=np.float64), vjp)

    def mean(self, a: Node, axis=None) -> Node:
        n = a.value.size if axis is None else a.value.shape[axis]
        return self.scale(self.sum(a, axis=axis), 1.0 / n)

    def softmax(self, a: Node, axis: int = -1) -> Node:
        v = a.value
        m = v.max(axis=axis, keepdims=True)
        e = np.exp(v - m)
        out = e / e.sum(axis=axis, keepdims=True)

        def vjp(g):
            dot = (g * out).sum(axis=axis, keepdims=True)
            return ((g - dot) * out,)

        return self._push("softmax", (a.idx,), out, vjp)

    def logsumexp(self, a: Node, axis=None, keepdims: bool = False) -> Node:
        v = a.value
        m = v.max(axis=axis, keepdims=True)
        e = np.exp(v - m)
        s = e.sum(axis=axis, keepdims=True)
        out = m + np.log(s)
        soft = e / s
        if not keepdims and axis is not None:
            out = np.squeeze(out, axis=axis)
        elif axis is None and not keepdims:
            out = out.reshape(())

        def vjp(g):
            if axis is None:
                return (soft * g,)
            gg = g if keepdims else np.expand_dims(g, axis)
            return (soft * gg,)

        return self._push("logsumexp", (a.idx,),
                          np.asarray(out, dtype=np.float64), vjp)

    # ------------------------------------------------------------- structural

    def concat(self, parts: Sequence[Node], axis: int = 0) -> Node:
        vals = [p.value for p in parts]
        out = np.concatenate(vals, axis=axis)
        sizes = [v.shape[axis] for v in vals]
        offsets = np.cumsum([0] + sizes)

        def vjp(g):
            return tuple(
                np.take(g, np.arange(offsets[i], offsets[i + 1]), axis=axis)
                for i in range(len(vals)))

        return self._push("concat", tuple(p.idx for p in parts), out, vjp)

    def slice_cols(self, a: Node, start: int, stop: int) -> Node:
        shape = a.value.shape

        def vjp(g):
            full = np.zeros(shape)
            full[..., start:stop] = g
            return (full,)

        return self._push("slice_cols", (a.idx,),
                          a.value[..., start:stop].copy(), vjp)

    def slice_rows(self, a: Node, start: int, stop: int) -> Node:
        shape = a.value.shape

        def vjp(g):
            full = np.zeros(shape)
            full[start:stop] = g
            return (full,)

        return self._push("slice_rows", (a.idx,),
                          a.value[start:stop].copy(), vjp)

    def pick(self, a: Node, rows: np.ndarray, cols: np.ndarray) -> Node:
        """Gather a[rows[i], cols[i]] into a 1-d vector."""
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        shape = a.value.shape
        out = a.value[rows, cols].copy()

        def vjp(g):
            full = np.zeros(shape)
            np.add.at(full, (rows, cols), g)
            return (full,)

        return self._push("pick", (a.idx,), out, vjp)

    # ---------------------------------------------------------------- backward

    def backward(self, root: Node) -> list:
        """Reverse accumulation from a scalar root.

        Returns the adjoint list indexed by node id (None where unreachable).
        """
        rec = self.nodes[root.idx]
        if rec.value.size != 1:
            raise NumericError(
                f"backward root must be scalar, got shape {rec.value.shape}")
        adjoints: list = [None] * len(self.nodes)
        adjoints[root.idx] = np.ones_like(rec.value)
        for i in range(root.idx, -1, -1):
            g = adjoints[i]
            if g is None:
                continue
            node = self.nodes[i]
            if node.vjp is None:
                continue
            contribs = node.vjp(g)
            for pid, contrib in zip(node.parents, contribs):
                if adjoints[pid] is None:
                    adjoints[pid] = np.array(contrib, dtype=np.float64)
                else:
                    adjoints[pid] = adjoints[pid] + contrib
        return adjoints

    def grad(self, adjoints: list, node: Node) -> Array:
        g = adjoints[node.idx]
        if g is None:
            return np.zeros_like(node.value)
        return g
