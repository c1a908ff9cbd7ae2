"""Minimal dense reverse-mode automatic differentiation on float64 numpy arrays.

The computation graph is define-by-run: every primitive that touches a tensor
requiring gradients records a closure that propagates adjoints back to its
inputs. ``backward`` replays those closures in reverse topological order.

Broadcasting is deliberately restricted: the only implicit broadcast is a
(1, d) row vector added to an (m, d) matrix (bias over rows). Everything else
must shape-match exactly so mistakes fail loudly.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ShapeError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference / evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _as_array(x):
    a = np.asarray(x, dtype=np.float64)
    return a


class Tensor:
    """Dense float64 array participating in a recorded computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = _as_array(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    # -- graph construction ------------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, scale(other, -1.0) if isinstance(other, Tensor) else -other)

    def __rsub__(self, other):
        return add(scale(self, -1.0), other)

    def __mul__(self, other):
        return hadamard(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self):
        return tensor_sum(self)

    def mean(self):
        return tensor_mean(self)

    # -- backward pass -----------------------------------------------------

    def backward(self):
        """Populate ``grad`` on every reachable tensor with requires_grad."""
        if self.data.ndim != 0:
            raise ContractError(
                f"backward requires a scalar loss, got shape {self.data.shape}")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self._accumulate(np.ones(()))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


# -- primitives ------------------------------------------------------------

def add(a, b):
    """Elementwise sum; also accepts a python scalar or a (1, d) bias row."""
    if not isinstance(a, Tensor):
        a, b = _lift(b), a
    if not isinstance(b, Tensor):
        b_val = float(b)

        def bwd(g, a=a):
            a._accumulate(g)

        return Tensor._make(a.data + b_val, (a,), bwd)
    if a.shape == b.shape:
        def bwd(g, a=a, b=b):
            a._accumulate(g)
            b._accumulate(g)

        return Tensor._make(a.data + b.data, (a, b), bwd)
    if (a.data.ndim == 2 and b.data.ndim == 2
            and b.shape == (1, a.shape[1])):
        def bwd(g, a=a, b=b):
            a._accumulate(g)
            b._accumulate(g.sum(axis=0, keepdims=True))

        return Tensor._make(a.data + b.data, (a, b), bwd)
    raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")


def hadamard(a, b):
    """Elementwise product; one operand may be a python scalar."""
    if not isinstance(a, Tensor):
        a, b = _lift(b), a
    if not isinstance(b, Tensor):
        return scale(a, float(b))
    if a.shape != b.shape:
        raise ShapeError(f"hadamard: incompatible shapes {a.shape} and {b.shape}")

    def bwd(g, a=a, b=b):
        a._accumulate(g * b.data)
        b._accumulate(g * a.data)

    return Tensor._make(a.data * b.data, (a, b), bwd)


def scale(a, c):
    c = float(c)

    def bwd(g, a=a):
        a._accumulate(g * c)

    return Tensor._make(a.data * c, (a,), bwd)


def matmul(a, b):
    a, b = _lift(a), _lift(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def bwd(g, a=a, b=b):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return Tensor._make(a.data @ b.data, (a, b), bwd)


def graph_propagate(prop, x, batch=1):
    """Apply a fixed n-by-n propagation matrix to each n-row block of x.

    x is a vertically stacked batch of shape (batch*n, d); the propagation
    matrix itself is a constant and receives no gradient.
    """
    prop = np.asarray(prop, dtype=np.float64)
    n = prop.shape[0]
    x = _lift(x)
    if x.data.ndim != 2 or x.shape[0] != batch * n:
        raise ShapeError(
            f"graph_propagate: x has shape {x.shape}, expected ({batch * n}, d)")
    d = x.shape[1]
    out = (prop @ x.data.reshape(batch, n, d)).reshape(batch * n, d)

    def bwd(g, x=x, prop=prop):
        x._accumulate((prop.T @ g.reshape(batch, n, d)).reshape(batch * n, d))

    return Tensor._make(out, (x,), bwd)


def sigmoid(x):
    x = _lift(x)
    v = x.data
    out = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                   np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))

    def bwd(g, x=x, out=out):
        x._accumulate(g * out * (1.0 - out))

    return Tensor._make(out, (x,), bwd)


def tanh(x):
    x = _lift(x)
    out = np.tanh(x.data)

    def bwd(g, x=x, out=out):
        x._accumulate(g * (1.0 - out * out))

    return Tensor._make(out, (x,), bwd)


def relu(x):
    # gradient at exactly 0 is defined as 0
    x = _lift(x)
    mask = x.data > 0

    def bwd(g, x=x, mask=mask):
        x._accumulate(g * mask)

    return Tensor._make(x.data * mask, (x,), bwd)


def square(x):
    x = _lift(x)

    def bwd(g, x=x):
        x._accumulate(g * 2.0 * x.data)

    return Tensor._make(x.data * x.data, (x,), bwd)


def concat_cols(a, b):
    a, b = _lift(a), _lift(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat_cols: incompatible shapes {a.shape} and {b.shape}")
    p = a.shape[1]

    def bwd(g, a=a, b=b, p=p):
        a._accumulate(g[:, :p])
        b._accumulate(g[:, p:])

    return Tensor._make(np.concatenate([a.data, b.data], axis=1), (a, b), bwd)


def tensor_sum(x):
    x = _lift(x)

    def bwd(g, x=x):
        x._accumulate(np.broadcast_to(g, x.data.shape))

    return Tensor._make(x.data.sum(), (x,), bwd)


def tensor_mean(x):
    x = _lift(x)
    n = x.data.size

    def bwd(g, x=x, n=n):
        x._accumulate(np.broadcast_to(g / n, x.data.shape))

    return Tensor._make(x.data.mean(), (x,), bwd)


# -- gradient checking -----------------------------------------------------

@dataclass
class GradCheckReport:
    """Per-input maximum relative error between analytic and numeric grads."""
    max_rel_err: float
    per_input: list = field(default_factory=list)
    tol: float = 0.0

    @property
    def passed(self):
        return self.max_rel_err < self.tol


def gradcheck(f, inputs, tol=1e-4, h=1e-5):
    """Compare analytic gradients of scalar-valued ``f`` to central differences.

    ``inputs`` is a list of Tensors with requires_grad set; f(inputs) must
    return a scalar Tensor. Returns a GradCheckReport; never raises on a
    failing comparison.
    """
    for t in inputs:
        t.zero_grad()
    out = f(inputs)
    if out.data.ndim != 0:
        raise ContractError("gradcheck: f must return a scalar Tensor")
    out.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy()
                for t in inputs]

    per_input = []
    worst = 0.0
    for idx, t in enumerate(inputs):
        flat = t.data.reshape(-1)
        num = np.zeros_like(flat)
        with no_grad():
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                fp = float(f(inputs).data)
                flat[i] = orig - h
                fm = float(f(inputs).data)
                flat[i] = orig
                num[i] = (fp - fm) / (2.0 * h)
        a = analytic[idx].reshape(-1)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(num)), 1.0)
        rel = float(np.max(np.abs(a - num) / denom)) if flat.size else 0.0
        per_input.append(rel)
        worst = max(worst, rel)
    return GradCheckReport(max_rel_err=worst, per_input=per_input, tol=tol)
