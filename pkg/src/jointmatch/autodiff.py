"""Dense float64 tensors with reverse-mode automatic differentiation.

The graph is implicit and rebuilt on every forward pass: each operation
returns a new `Tensor` that caches its value, keeps references to its parent
tensors, and owns a closure that routes an incoming gradient to those
parents. `backward` orders the subgraph reachable from a scalar root
topologically and runs the closures in reverse.

Scope is deliberately narrow: matrices and batched row vectors, elementwise
ops that broadcast only across a leading batch dimension (or against a
scalar), and full reductions. Everything is float64 and every op is
deterministic, so repeated evaluation of the same graph is bit-identical.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = ["Graph", "ShapeError", "Tensor", "backward", "concat"]

_node_counter = itertools.count()


class ShapeError(ValueError):
    """Operand shapes do not conform for the requested operation."""


def _shape_error(op: str, *shapes) -> ShapeError:
    rendered = " and ".join(str(tuple(int(d) for d in s)) for s in shapes)
    return ShapeError(f"{op}: incompatible shapes {rendered}")


def _is_scalar_shape(shape) -> bool:
    return int(np.prod(shape, dtype=np.int64)) == 1


def _binary_compatible(a, b) -> bool:
    if a == b:
        return True
    if _is_scalar_shape(a) or _is_scalar_shape(b):
        return True
    # leading batch-dim broadcast: (batch, ...) against (...)
    if len(a) == len(b) + 1 and a[1:] == b:
        return True
    if len(b) == len(a) + 1 and b[1:] == a:
        return True
    return False


def _shrink(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the shape of its operand."""
    shape = tuple(shape)
    if grad.shape == shape:
        return grad
    if _is_scalar_shape(shape):
        return np.asarray(grad.sum(), dtype=np.float64).reshape(shape)
    extra = grad.ndim - len(shape)
    out = grad.sum(axis=tuple(range(extra))) if extra > 0 else grad
    if out.shape != shape:
        raise _shape_error("grad-shrink", out.shape, shape)
    return out


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    t = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + t), t / (1.0 + t))


class Tensor:
    """A dense float64 array plus its position in a computation graph.

    Leaf tensors (parameters, inputs, constants) have ``op == "leaf"`` and no
    parents. Non-leaf tensors cache their forward value and remember how to
    push an incoming gradient to their parents.
    """

    __slots__ = ("data", "grad", "op", "parents", "node_id", "_push")

    def __init__(self, data, op: str = "leaf", parents: tuple = ()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.op = op
        self.parents = tuple(parents)
        self.node_id = next(_node_counter)
        self._push: Callable[[np.ndarray], None] | None = None

    # ------------------------------------------------------------- shape

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item: tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(op={self.op!r}, shape={self.shape}, node_id={self.node_id})"

    # ------------------------------------------------------- binary ops

    def _binary(self, other, op, forward, da, db) -> "Tensor":
        other = as_tensor(other)
        if not _binary_compatible(self.shape, other.shape):
            raise _shape_error(op, self.shape, other.shape)
        out = Tensor(forward(self.data, other.data), op, (self, other))

        def push(g, a=self, b=other, da=da, db=db):
            a.grad += _shrink(da(g, a.data, b.data), a.data.shape)
            b.grad += _shrink(db(g, a.data, b.data), b.data.shape)

        out._push = push
        return out

    def add(self, other) -> "Tensor":
        return self._binary(
            other, "add", lambda a, b: a + b,
            lambda g, a, b: g, lambda g, a, b: g,
        )

    def sub(self, other) -> "Tensor":
        return self._binary(
            other, "sub", lambda a, b: a - b,
            lambda g, a, b: g, lambda g, a, b: -g,
        )

    def mul(self, other) -> "Tensor":
        return self._binary(
            other, "mul", lambda a, b: a * b,
            lambda g, a, b: g * b, lambda g, a, b: g * a,
        )

    def matmul(self, other) -> "Tensor":
        other = as_tensor(other)
        if (
            self.data.ndim != 2
            or other.data.ndim != 2
            or self.shape[1] != other.shape[0]
        ):
            raise _shape_error("matmul", self.shape, other.shape)
        out = Tensor(self.data @ other.data, "matmul", (self, other))

        def push(g, a=self, b=other):
            a.grad += g @ b.data.T
            b.grad += a.data.T @ g

        out._push = push
        return out

    # -------------------------------------------------------- unary ops

    def _unary(self, op, value, dx) -> "Tensor":
        out = Tensor(value, op, (self,))

        def push(g, a=self, v=out.data, dx=dx):
            a.grad += dx(g, a.data, v)

        out._push = push
        return out

    def relu(self) -> "Tensor":
        # gradient at exactly 0 is 0
        return self._unary("relu", np.maximum(self.data, 0.0),
                           lambda g, x, v: g * (x > 0.0))

    def sigmoid(self) -> "Tensor":
        return self._unary("sigmoid", _stable_sigmoid(self.data),
                           lambda g, x, v: g * v * (1.0 - v))

    def exp(self) -> "Tensor":
        return self._unary("exp", np.exp(self.data), lambda g, x, v: g * v)

    def log(self) -> "Tensor":
        if np.any(self.data <= 0.0):
            raise ValueError(
                f"log: non-positive input (min={self.data.min()!r}); "
                "clamp probabilities before taking logs"
            )
        return self._unary("log", np.log(self.data), lambda g, x, v: g / x)

    def abs(self) -> "Tensor":
        return self._unary("abs", np.abs(self.data),
                           lambda g, x, v: g * np.sign(x))

    def square(self) -> "Tensor":
        return self._unary("square", self.data * self.data,
                           lambda g, x, v: g * 2.0 * x)

    def neg(self) -> "Tensor":
        return self._unary("neg", -self.data, lambda g, x, v: -g)

    def clip(self, lo: float, hi: float) -> "Tensor":
        if not lo < hi:
            raise ValueError(f"clip: empty interval [{lo}, {hi}]")
        return self._unary("clip", np.clip(self.data, lo, hi),
                           lambda g, x, v: g * ((x > lo) & (x < hi)))

    def sum(self) -> "Tensor":
        return self._unary("sum", np.asarray(self.data.sum()),
                           lambda g, x, v: np.broadcast_to(g, x.shape))

    def mean(self) -> "Tensor":
        return self._unary("mean", np.asarray(self.data.mean()),
                           lambda g, x, v: np.broadcast_to(g / x.size, x.shape))

    # --------------------------------------------------------- operators

    def __add__(self, other):
        return self.add(other)

    def __radd__(self, other):
        return as_tensor(other).add(self)

    def __sub__(self, other):
        return self.sub(other)

    def __rsub__(self, other):
        return as_tensor(other).sub(self)

    def __mul__(self, other):
        return self.mul(other)

    def __rmul__(self, other):
        return as_tensor(other).mul(self)

    def __matmul__(self, other):
        return self.matmul(other)

    def __neg__(self):
        return self.neg()

    def backward(self, leaves: Iterable["Tensor"] = ()) -> None:
        backward(self, leaves)


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (int, float, np.floating, np.integer, np.ndarray, list, tuple)):
        return Tensor(x)
    raise TypeError(f"cannot interpret {type(x).__name__} as a Tensor")


def concat(tensors: Sequence, axis: int = 1) -> Tensor:
    """Concatenate along `axis`; all other dimensions must match."""
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: need at least one tensor")
    ndim = ts[0].data.ndim
    if any(t.data.ndim != ndim for t in ts):
        raise _shape_error("concat", *(t.shape for t in ts))
    if not -ndim <= axis < ndim:
        raise ShapeError(f"concat: axis {axis} out of range for ndim {ndim}")
    axis = axis % ndim
    for d in range(ndim):
        if d != axis and len({t.shape[d] for t in ts}) != 1:
            raise _shape_error("concat", *(t.shape for t in ts))
    out = Tensor(np.concatenate([t.data for t in ts], axis=axis), "concat", tuple(ts))
    widths = [t.shape[axis] for t in ts]

    def push(g, ts=ts, widths=widths, axis=axis):
        start = 0
        index = [slice(None)] * g.ndim
        for t, w in zip(ts, widths):
            index[axis] = slice(start, start + w)
            t.grad += g[tuple(index)]
            start += w

    out._push = push
    return out


class Graph:
    """Topologically ordered record of every node reachable from a root.

    `nodes` lists tensors leaves-first; each non-leaf node carries its op
    kind, its parent references, and its cached forward value, so the list
    doubles as an op record. The structure is acyclic by construction
    (every op creates a fresh output node).
    """

    __slots__ = ("nodes",)

    def __init__(self, nodes: list):
        self.nodes = nodes

    @classmethod
    def trace(cls, root: Tensor) -> "Graph":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in reversed(node.parents):
                if id(parent) not in seen:
                    stack.append((parent, False))
        return cls(order)

    def records(self):
        """Yield (op, parent node ids, node id) for every non-leaf node."""
        for node in self.nodes:
            if node.parents:
                yield node.op, tuple(p.node_id for p in node.parents), node.node_id


def backward(root: Tensor, leaves: Iterable[Tensor] = ()) -> None:
    """Fill `.grad` with d(root)/d(node) for every node reachable from root.

    `root` must be scalar. Tensors passed via `leaves` are zeroed first, so
    leaves the root does not depend on end up with an all-zero gradient
    rather than a stale or missing one.
    """
    if root.data.size != 1:
        raise ShapeError(f"backward: root must be scalar, got shape {root.shape}")
    graph = Graph.trace(root)
    for t in leaves:
        t.grad = np.zeros_like(t.data)
    for t in graph.nodes:
        t.grad = np.zeros_like(t.data)
    root.grad = np.ones_like(root.data)
    for t in reversed(graph.nodes):
        if t._push is not None:
            t._push(t.grad)
