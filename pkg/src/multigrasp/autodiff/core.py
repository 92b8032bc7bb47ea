"""Reverse-mode differentiation on numpy arrays.

Each op returns a new :class:`DiffArray` holding its parents and a closure
that turns the output gradient into parent gradients. ``backward`` sorts the
reachable nodes topologically and runs the closures in reverse order.
Gradients of leaves accumulate across calls until :meth:`DiffArray.zero_grad`.
"""
import numpy as np

from ..errors import ShapeMismatch


class DiffArray:
    __slots__ = ("value", "grad", "requires_grad", "parents", "_backward", "op", "name")

    def __init__(self, value, requires_grad=False, parents=(), backward=None, op="leaf", name=None):
        self.value = value if isinstance(value, np.ndarray) else np.asarray(value, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.parents = parents
        self._backward = backward
        self.op = op
        self.name = name

    def __repr__(self):
        label = self.name or self.op
        return f"DiffArray({label}, shape={self.shape}, dtype={self.dtype})"

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    @property
    def size(self):
        return self.value.size

    def item(self):
        return float(self.value)

    def zero_grad(self):
        self.grad = None

    def accumulate(self, g):
        if not self.requires_grad:
            return
        if g.shape != self.value.shape:
            raise ShapeMismatch(f"gradient {g.shape} for value {self.value.shape}")
        self.grad = g if self.grad is None else self.grad + g

    def backward(self, seed=None):
        Graph.from_output(self).backward(seed)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, c):
        return scale(self, c)

    __rmul__ = __mul__


def constant(value, dtype=None):
    return DiffArray(np.asarray(value, dtype=dtype or np.float64))


def parameter(value, name=None):
    return DiffArray(np.array(value), requires_grad=True, name=name)


def _node(value, parents, backward, op):
    needs = any(p.requires_grad for p in parents)
    return DiffArray(value, needs, tuple(parents), backward if needs else None, op)


class Graph:
    """Nodes reachable from an output, in topological order (inputs first)."""

    def __init__(self, nodes):
        self.nodes = nodes

    @classmethod
    def from_output(cls, out):
        order, seen = [], set()
        stack = [(out, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen:
                    stack.append((p, False))
        return cls(order)

    @property
    def output(self):
        return self.nodes[-1]

    def backward(self, seed=None):
        out = self.output
        if seed is None:
            if out.size != 1:
                raise ShapeMismatch(f"backward without seed needs a scalar, got shape {out.shape}")
            seed = np.ones_like(out.value)
        for node in self.nodes:
            if node.parents:
                node.grad = None
        out.accumulate(np.asarray(seed, dtype=out.dtype).reshape(out.shape))
        for node in reversed(self.nodes):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _as_diff(x, like):
    return x if isinstance(x, DiffArray) else DiffArray(np.asarray(x, dtype=like.dtype))


def add(a, b):
    b = _as_diff(b, a)
    a = _as_diff(a, b)
    if a.shape != b.shape and b.size != 1 and a.size != 1:
        raise ShapeMismatch(f"add {a.shape} + {b.shape}")

    def back(g):
        a.accumulate(g if a.shape == g.shape else np.asarray(g.sum()).reshape(a.shape))
        b.accumulate(g if b.shape == g.shape else np.asarray(g.sum()).reshape(b.shape))

    return _node(a.value + b.value, (a, b), back, "add")


def scale(a, c):
    c = float(c)

    def back(g):
        a.accumulate(g * np.asarray(c, dtype=g.dtype))

    return _node(a.value * np.asarray(c, dtype=a.dtype), (a,), back, "scale")


def reshape(a, shape):
    def back(g):
        a.accumulate(g.reshape(a.shape))

    return _node(a.value.reshape(shape), (a,), back, "reshape")


def transpose(a, axes):
    inv = np.argsort(axes)

    def back(g):
        a.accumulate(np.ascontiguousarray(g.transpose(inv)))

    return _node(np.ascontiguousarray(a.value.transpose(axes)), (a,), back, "transpose")


def index(a, key):
    """Gather ``a.value[key]``; the gradient scatters back with accumulation."""
    def back(g):
        full = np.zeros_like(a.value)
        np.add.at(full, key, g)
        a.accumulate(full)

    return _node(np.ascontiguousarray(a.value[key]), (a,), back, "index")


def total(a):
    def back(g):
        a.accumulate(np.broadcast_to(g, a.shape).copy())

    return _node(np.asarray(a.value.sum(), dtype=a.dtype), (a,), back, "sum")


def mul(a, b):
    """Element-wise product of same-shape arrays."""
    b = _as_diff(b, a)
    if a.shape != b.shape:
        raise ShapeMismatch(f"mul {a.shape} * {b.shape}")

    def back(g):
        a.accumulate(g * b.value)
        b.accumulate(g * a.value)

    return _node(a.value * b.value, (a, b), back, "mul")
