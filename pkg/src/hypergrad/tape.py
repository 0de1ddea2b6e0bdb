"""Reverse-mode automatic differentiation over numpy float64 arrays.

The gradient of a program is itself a program: every backward rule below is
written in terms of the same graph operations, so `gradients` applied to the
output of `gradients` yields correct second-order quantities.  That is the
mechanism behind Hessian-vector products and mixed second-order products
without ever materializing a Hessian.

Scope is deliberately small: dense arrays, float64 only, no control flow in
the graph, derivatives up to second order in practice (nothing prevents
deeper nesting).  Any non-finite intermediate raises NumericError naming the
offending node.
"""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .errors import DimensionError, NumericError

_serial = itertools.count()


class Node:
    """One array value in a computation graph.

    `parents` are the operands; `vjps[k]` maps the output cotangent (a Node)
    to the cotangent contribution of `parents[k]`, expressed with graph
    operations so the result is differentiable again.
    """

    __slots__ = ("value", "parents", "vjps", "nid", "op")

    def __init__(self, value, parents=(), vjps=(), op="input"):
        arr = np.asarray(value, dtype=np.float64)
        self.nid = next(_serial)
        if not np.all(np.isfinite(arr)):
            raise NumericError(
                f"non-finite value produced by op {op!r} (node {self.nid})",
                node_id=self.nid,
                op=op,
            )
        self.value = arr
        self.parents = tuple(parents)
        self.vjps = tuple(vjps)
        self.op = op

    @property
    def shape(self):
        return self.value.shape

    # operator sugar -- all routed through the module-level primitives
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return subtract(self, other)

    def __rsub__(self, other):
        return subtract(other, self)

    def __mul__(self, other):
        return multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return divide(self, other)

    def __rtruediv__(self, other):
        return divide(other, self)

    def __neg__(self):
        return negative(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Node(op={self.op!r}, shape={self.shape})"


def as_node(x) -> Node:
    return x if isinstance(x, Node) else Node(x, op="const")


def constant(x) -> Node:
    return Node(x, op="const")


def detach(x: Node) -> Node:
    """A constant node carrying x's value; gradients do not flow through it."""
    return Node(as_node(x).value, op="detach")


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------


def _unbroadcast(g: Node, shape: tuple) -> Node:
    """Sum a cotangent down to `shape` (the inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    while g.value.ndim > len(shape):
        g = reduce_sum(g, axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and g.value.shape[ax] != 1:
            g = reduce_sum(g, axis=ax, keepdims=True)
    return g


def add(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    with np.errstate(over="ignore", invalid="ignore"):
        value = a.value + b.value
    return Node(
        value,
        (a, b),
        (lambda g: _unbroadcast(g, a.shape), lambda g: _unbroadcast(g, b.shape)),
        op="add",
    )


def subtract(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    with np.errstate(over="ignore", invalid="ignore"):
        value = a.value - b.value
    return Node(
        value,
        (a, b),
        (
            lambda g: _unbroadcast(g, a.shape),
            lambda g: _unbroadcast(negative(g), b.shape),
        ),
        op="subtract",
    )


def negative(a) -> Node:
    a = as_node(a)
    return Node(-a.value, (a,), (lambda g: negative(g),), op="negative")


def multiply(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    with np.errstate(over="ignore", invalid="ignore"):
        value = a.value * b.value
    return Node(
        value,
        (a, b),
        (
            lambda g: _unbroadcast(multiply(g, b), a.shape),
            lambda g: _unbroadcast(multiply(g, a), b.shape),
        ),
        op="multiply",
    )


def divide(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        value = a.value / b.value
    return Node(
        value,
        (a, b),
        (
            lambda g: _unbroadcast(divide(g, b), a.shape),
            lambda g: _unbroadcast(
                negative(divide(multiply(g, a), multiply(b, b))), b.shape
            ),
        ),
        op="divide",
    )


def matmul(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    an, bn = a.value.ndim, b.value.ndim
    if a.shape[-1] != b.shape[0]:
        raise DimensionError(
            f"matmul inner dimensions disagree: {a.shape} @ {b.shape}"
        )
    if an == 2 and bn == 2:
        vjps = (
            lambda g: matmul(g, transpose(b)),
            lambda g: matmul(transpose(a), g),
        )
    elif an == 2 and bn == 1:
        m, n = a.shape
        vjps = (
            lambda g: multiply(reshape(g, (m, 1)), reshape(b, (1, n))),
            lambda g: matmul(transpose(a), g),
        )
    elif an == 1 and bn == 2:
        m, n = b.shape
        vjps = (
            lambda g: matmul(b, g),
            lambda g: multiply(reshape(a, (m, 1)), reshape(g, (1, n))),
        )
    else:
        raise DimensionError(
            f"matmul supports 2D@2D, 2D@1D, 1D@2D; got {a.shape} @ {b.shape}"
        )
    with np.errstate(over="ignore", invalid="ignore"):
        value = a.value @ b.value
    return Node(value, (a, b), vjps, op="matmul")


def exp(a) -> Node:
    a = as_node(a)
    with np.errstate(over="ignore"):  # overflow surfaces as NumericError
        out = Node(np.exp(a.value), (a,), (), op="exp")
    out.vjps = (lambda g: multiply(g, out),)
    return out


def log(a) -> Node:
    a = as_node(a)
    with np.errstate(invalid="ignore", divide="ignore"):  # domain errors -> NumericError
        return Node(np.log(a.value), (a,), (lambda g: divide(g, a),), op="log")


def tanh(a) -> Node:
    a = as_node(a)
    out = Node(np.tanh(a.value), (a,), (), op="tanh")
    out.vjps = (lambda g: multiply(g, subtract(1.0, multiply(out, out))),)
    return out


def sigmoid(a) -> Node:
    a = as_node(a)
    x = a.value
    z = np.exp(-np.abs(x))  # stable in both tails
    val = np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    out = Node(val, (a,), (), op="sigmoid")
    out.vjps = (lambda g: multiply(g, multiply(out, subtract(1.0, out))),)
    return out


def power(a, exponent: float) -> Node:
    a = as_node(a)
    p = float(exponent)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        value = a.value**p
    return Node(
        value,
        (a,),
        (lambda g: multiply(g, multiply(p, power(a, p - 1.0))),),
        op="power",
    )


def reduce_sum(a, axis: int | None = None, keepdims: bool = False) -> Node:
    a = as_node(a)
    shape = a.shape

    def vjp(g):
        if axis is not None and not keepdims:
            kept = list(g.shape)
            kept.insert(axis if axis >= 0 else len(shape) + axis, 1)
            g = reshape(g, tuple(kept))
        return multiply(g, constant(np.ones(shape)))

    return Node(np.sum(a.value, axis=axis, keepdims=keepdims), (a,), (vjp,), op="sum")


def mean(a, axis: int | None = None) -> Node:
    a = as_node(a)
    count = a.value.size if axis is None else a.shape[axis]
    return divide(reduce_sum(a, axis=axis), float(count))


def reshape(a, shape) -> Node:
    a = as_node(a)
    orig = a.shape
    return Node(
        a.value.reshape(shape), (a,), (lambda g: reshape(g, orig),), op="reshape"
    )


def transpose(a) -> Node:
    a = as_node(a)
    if a.value.ndim != 2:
        raise DimensionError(f"transpose expects a 2-D array, got shape {a.shape}")
    return Node(a.value.T, (a,), (lambda g: transpose(g),), op="transpose")


def slice1d(a, start: int, stop: int) -> Node:
    a = as_node(a)
    if a.value.ndim != 1:
        raise DimensionError(f"slice1d expects a 1-D array, got shape {a.shape}")
    total = a.shape[0]
    return Node(
        a.value[start:stop],
        (a,),
        (lambda g: pad1d(g, start, total),),
        op="slice1d",
    )


def pad1d(a, start: int, total: int) -> Node:
    """Embed a 1-D array into a zero vector of length `total` at `start`."""
    a = as_node(a)
    stop = start + a.shape[0]
    out = np.zeros(total)
    out[start:stop] = a.value
    return Node(out, (a,), (lambda g: slice1d(g, start, stop),), op="pad1d")


# ---------------------------------------------------------------------------
# composite operations
# ---------------------------------------------------------------------------


def dot(a, b) -> Node:
    return reduce_sum(multiply(a, b))


def squared_error(pred, target) -> Node:
    """0.5 * mean of elementwise squared differences."""
    d = subtract(pred, target)
    return multiply(0.5, mean(multiply(d, d)))


def sum_squares(a) -> Node:
    return reduce_sum(multiply(a, a))


def softmax_cross_entropy(logits, onehot) -> Node:
    """Mean cross-entropy between softmax(logits) and one-hot targets.

    Stabilized with a detached row-max; the detachment is exact because the
    log-sum-exp value is invariant to the shift for any constant.
    """
    logits, onehot = as_node(logits), as_node(onehot)
    if logits.value.ndim != 2 or logits.shape != onehot.shape:
        raise DimensionError(
            f"softmax_cross_entropy expects matching (n, k) arrays, got "
            f"{logits.shape} and {onehot.shape}"
        )
    shift = constant(np.max(logits.value, axis=1, keepdims=True))
    z = subtract(logits, shift)
    lse = add(
        log(reduce_sum(exp(z), axis=1)),
        reshape(shift, (logits.shape[0],)),
    )
    picked = reduce_sum(multiply(logits, onehot), axis=1)
    return mean(subtract(lse, picked))


def logits_of(x, w_matrix) -> Node:
    """Linear scores: rows of x against columns of w_matrix."""
    return matmul(x, w_matrix)


# ---------------------------------------------------------------------------
# reverse pass
# ---------------------------------------------------------------------------


def _topo_from(output: Node) -> list[Node]:
    """Reverse-topological order (output first), iterative DFS."""
    order: list[Node] = []
    visited: set[int] = set()
    stack: list[tuple[Node, bool]] = [(output, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if node.nid in visited:
            continue
        visited.add(node.nid)
        stack.append((node, True))
        for parent in node.parents:
            if parent.nid not in visited:
                stack.append((parent, False))
    order.reverse()
    return order


def gradients(output: Node, wrt: Sequence[Node]) -> list[Node]:
    """Gradients of a scalar output with respect to each node in `wrt`.

    Returned gradients are Nodes built from graph operations, so they can be
    differentiated again.  Inputs the output does not depend on get exact
    zero gradients.
    """
    if output.value.ndim != 0:
        raise DimensionError(
            f"gradients requires a scalar output, got shape {output.shape}"
        )
    wrt_ids = {x.nid for x in wrt}
    accum: dict[int, Node] = {output.nid: constant(np.ones(()))}
    for node in _topo_from(output):
        g = accum.pop(node.nid, None)
        if g is None:
            continue
        if node.nid in wrt_ids:
            accum[node.nid] = g  # keep it for collection below
        for parent, vjp in zip(node.parents, node.vjps):
            contribution = vjp(g)
            held = accum.get(parent.nid)
            accum[parent.nid] = (
                contribution if held is None else add(held, contribution)
            )
    out = []
    for x in wrt:
        g = accum.get(x.nid)
        out.append(g if g is not None else constant(np.zeros(x.shape)))
    return out
