"""Reverse-mode automatic differentiation over dense 2-D float64 matrices.

Every value in the graph is a numpy array of shape (rows, cols).  The set of
primitives is deliberately small: exactly what MLPs, masked multi-head
attention and squashed-Gaussian log-densities need.  No broadcasting beyond
row-vector bias addition; shape errors are raised eagerly with both shapes
named so graph construction bugs surface at the faulty op.

GELU uses the tanh approximation with its exact analytic derivative, so a
finite-difference check differentiates the same function the forward pass
computes.  The relu subgradient at 0 is 0.
"""

from __future__ import annotations

import numpy as np

_MASK_BIAS = -1e9


class Node:
    """One value in the computation graph.

    ``parents`` and ``_vjp`` are empty/None for leaves.  ``_vjp`` maps the
    gradient at this node to gradients for each parent.  Gradients accumulate
    additively over fan-out.
    """

    __slots__ = ("value", "parents", "_vjp", "grad")

    def __init__(self, value, parents=(), vjp=None):
        value = np.asarray(value, dtype=np.float64)
        if value.ndim == 0:
            value = value.reshape(1, 1)
        elif value.ndim == 1:
            value = value.reshape(1, -1)
        if value.ndim != 2:
            raise ValueError(f"nodes hold 2-D matrices, got shape {value.shape}")
        self.value = value
        self.parents = parents
        self._vjp = vjp
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        if self.value.shape != (1, 1):
            raise ValueError(f"item() needs a scalar node, got shape {self.value.shape}")
        return float(self.value[0, 0])

    # convenience operators; scalars are folded in as constants
    def __add__(self, other):
        return add(self, _lift(other))

    def __sub__(self, other):
        return add(self, scale(_lift(other), -1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)


def leaf(value) -> Node:
    """Wrap an array as a graph leaf (parameter or input)."""
    return Node(value)


def constant(value) -> Node:
    """Alias of :func:`leaf`; used where the value never needs a gradient."""
    return Node(value)


def _lift(x):
    if isinstance(x, Node):
        return x
    return Node(x)


def _check_same_shape(op, a, b):
    if a.value.shape != b.value.shape:
        raise ValueError(f"{op}: shape mismatch {a.value.shape} vs {b.value.shape}")


# ---------------------------------------------------------------------------
# primitives


def matmul(a: Node, b: Node) -> Node:
    if a.value.shape[1] != b.value.shape[0]:
        raise ValueError(f"matmul: inner dims differ, {a.value.shape} @ {b.value.shape}")
    out = a.value @ b.value

    def vjp(g):
        return g @ b.value.T, a.value.T @ g

    return Node(out, (a, b), vjp)


def add(a: Node, b: Node) -> Node:
    """Elementwise add; ``b`` may also be a 1×n row bias broadcast over rows."""
    if a.value.shape == b.value.shape:
        def vjp(g):
            return g, g
    elif b.value.shape == (1, a.value.shape[1]):
        def vjp(g):
            return g, g.sum(axis=0, keepdims=True)
    else:
        raise ValueError(f"add: shape mismatch {a.value.shape} vs {b.value.shape}")
    return Node(a.value + b.value, (a, b), vjp)


def mul(a: Node, b: Node) -> Node:
    _check_same_shape("mul", a, b)

    def vjp(g):
        return g * b.value, g * a.value

    return Node(a.value * b.value, (a, b), vjp)


def scale(a: Node, c: float) -> Node:
    c = float(c)

    def vjp(g):
        return (g * c,)

    return Node(a.value * c, (a,), vjp)


def transpose(a: Node) -> Node:
    def vjp(g):
        return (g.T,)

    return Node(a.value.T, (a,), vjp)


def concat_rows(nodes) -> Node:
    nodes = list(nodes)
    cols = {n.value.shape[1] for n in nodes}
    if len(cols) != 1:
        raise ValueError(f"concat_rows: column counts differ: {sorted(cols)}")
    splits = np.cumsum([n.value.shape[0] for n in nodes])[:-1]

    def vjp(g):
        return tuple(np.vsplit(g, splits))

    return Node(np.vstack([n.value for n in nodes]), tuple(nodes), vjp)


def slice_rows(a: Node, start: int, stop: int) -> Node:
    n = a.value.shape[0]
    if not (0 <= start < stop <= n):
        raise ValueError(f"slice_rows: [{start}, {stop}) out of range for {a.value.shape}")

    def vjp(g):
        full = np.zeros_like(a.value)
        full[start:stop] = g
        return (full,)

    return Node(a.value[start:stop], (a,), vjp)


def slice_row(a: Node, i: int) -> Node:
    return slice_rows(a, i, i + 1)


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(a: Node) -> Node:
    x = a.value
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def vjp(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x**2)
        d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * dinner
        return (g * d,)

    return Node(out, (a,), vjp)


def tanh(a: Node) -> Node:
    t = np.tanh(a.value)

    def vjp(g):
        return (g * (1.0 - t**2),)

    return Node(t, (a,), vjp)


def exp(a: Node) -> Node:
    e = np.exp(a.value)

    def vjp(g):
        return (g * e,)

    return Node(e, (a,), vjp)


def log(a: Node) -> Node:
    if np.any(a.value <= 0):
        raise ValueError("log: non-positive input")

    def vjp(g):
        return (g / a.value,)

    return Node(np.log(a.value), (a,), vjp)


def softplus(a: Node) -> Node:
    x = a.value
    out = np.logaddexp(0.0, x)

    def vjp(g):
        return (g / (1.0 + np.exp(-x)),)

    return Node(out, (a,), vjp)


def relu(a: Node) -> Node:
    active = a.value > 0  # subgradient at 0 is 0

    def vjp(g):
        return (g * active,)

    return Node(np.where(active, a.value, 0.0), (a,), vjp)


def square(a: Node) -> Node:
    def vjp(g):
        return (g * 2.0 * a.value,)

    return Node(a.value**2, (a,), vjp)


def sum_all(a: Node) -> Node:
    def vjp(g):
        return (np.full_like(a.value, g[0, 0]),)

    return Node(a.value.sum().reshape(1, 1), (a,), vjp)


def mean_all(a: Node) -> Node:
    n = a.value.size

    def vjp(g):
        return (np.full_like(a.value, g[0, 0] / n),)

    return Node(a.value.mean().reshape(1, 1), (a,), vjp)


def max_pair(a: Node, b: Node) -> Node:
    _check_same_shape("max_pair", a, b)
    pick_a = a.value >= b.value  # ties route to the first argument

    def vjp(g):
        return g * pick_a, g * ~pick_a

    return Node(np.where(pick_a, a.value, b.value), (a, b), vjp)


def min_pair(a: Node, b: Node) -> Node:
    _check_same_shape("min_pair", a, b)
    pick_a = a.value <= b.value

    def vjp(g):
        return g * pick_a, g * ~pick_a

    return Node(np.where(pick_a, a.value, b.value), (a, b), vjp)


def clip(a: Node, lo: float, hi: float) -> Node:
    """Elementwise clamp with zero gradient outside [lo, hi]."""
    inside = (a.value >= lo) & (a.value <= hi)

    def vjp(g):
        return (g * inside,)

    return Node(np.clip(a.value, lo, hi), (a,), vjp)


def softmax_rows_masked(scores: Node, allowed: np.ndarray) -> Node:
    """Row-wise softmax with a -1e9 additive bias on disallowed key columns.

    ``allowed`` is a boolean matrix of the same shape as ``scores``; every row
    must keep at least one allowed column.
    """
    allowed = np.asarray(allowed, dtype=bool)
    if allowed.shape != scores.value.shape:
        raise ValueError(
            f"softmax_rows_masked: mask shape {allowed.shape} vs scores {scores.value.shape}"
        )
    if not allowed.any(axis=1).all():
        raise ValueError("softmax_rows_masked: a row has no attendable columns")
    biased = np.where(allowed, scores.value, scores.value + _MASK_BIAS)
    shifted = biased - biased.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=1, keepdims=True)
        return (out * (g - dot),)

    return Node(out, (scores,), vjp)


# ---------------------------------------------------------------------------
# backward pass


def backward(root: Node) -> None:
    """Reverse sweep from a scalar root; populates ``grad`` on every ancestor."""
    if root.value.shape != (1, 1):
        raise ValueError(f"backward: root must be scalar, got shape {root.value.shape}")

    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))

    for node in order:
        node.grad = np.zeros_like(node.value)
    root.grad = np.ones((1, 1))

    for node in reversed(order):
        if node._vjp is None:
            continue
        grads = node._vjp(node.grad)
        for parent, g in zip(node.parents, grads):
            parent.grad += g


def grad_wrt_input(build, input_value: np.ndarray) -> np.ndarray:
    """Gradient of a scalar-valued graph with respect to one input matrix.

    ``build`` receives the input wrapped as a leaf and must return a scalar
    node; everything else it closes over stays fixed.
    """
    x = leaf(input_value)
    out = build(x)
    backward(out)
    return x.grad.copy()
