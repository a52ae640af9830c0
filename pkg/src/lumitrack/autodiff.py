"""Reverse-mode automatic differentiation on dense float64 arrays.

A Tensor wraps a numpy array plus an optional gradient accumulator. Ops
build a tape (each result keeps closures over its parents); calling
``backward()`` on a scalar walks the tape in reverse topological order and
accumulates gradients into every reachable tensor with ``requires_grad``.
The tape is rebuilt from scratch every iteration; nothing is retained
between optimizer steps.

All data is float64. Values are treated as immutable after construction;
only ``grad`` buffers mutate.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None

    # ---- introspection ----------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(()))

    def numpy(self):
        """The raw value, detached from the tape. Do not mutate."""
        return self.data

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # ---- tape -------------------------------------------------------------

    def backward(self):
        """Accumulate gradients of this scalar into all reachable leaves."""
        if self.size != 1:
            raise ValueError(
                f"backward() requires a scalar loss, got shape {self.shape}"
            )
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # ---- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


def _toposort(root):
    """Iterative post-order over the tape (graphs can be a few 1000 nodes)."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _accum(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g, shape):
    """Reduce gradient g back to `shape` after numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def from_op(data, parents, backward_fn):
    """Build a tape node for a custom op.

    `backward_fn(grad)` must call `accumulate(parent, local_grad)` itself
    via the exposed `_accum`; see nn.py and render.py for usage.
    """
    out = Tensor(data)
    parents = tuple(p for p in parents if isinstance(p, Tensor))
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = parents
        out._backward = backward_fn
    return out


# ---- elementwise binary ops ------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data)
    out.requires_grad = a.requires_grad or b.requires_grad
    if out.requires_grad:
        out._parents = (a, b)

        def bwd(g):
            _accum(a, _unbroadcast(g, a.shape))
            _accum(b, _unbroadcast(g, b.shape))

        out._backward = bwd
    return out


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data - b.data)
    out.requires_grad = a.requires_grad or b.requires_grad
    if out.requires_grad:
        out._parents = (a, b)

        def bwd(g):
            _accum(a, _unbroadcast(g, a.shape))
            _accum(b, _unbroadcast(-g, b.shape))

        out._backward = bwd
    return out


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data)
    out.requires_grad = a.requires_grad or b.requires_grad
    if out.requires_grad:
        out._parents = (a, b)

        def bwd(g):
            _accum(a, _unbroadcast(g * b.data, a.shape))
            _accum(b, _unbroadcast(g * a.data, b.shape))

        out._backward = bwd
    return out


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data / b.data)
    out.requires_grad = a.requires_grad or b.requires_grad
    if out.requires_grad:
        out._parents = (a, b)

        def bwd(g):
            _accum(a, _unbroadcast(g / b.data, a.shape))
            _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

        out._backward = bwd
    return out


def neg(a):
    a = as_tensor(a)
    out = Tensor(-a.data)
    out.requires_grad = a.requires_grad
    if out.requires_grad:
        out._parents = (a,)
        out._backward = lambda g: _accum(a, -g)
    return out


def power(a, p):
    """Elementwise a**p for a constant exponent p."""
    a = as_tensor(a)
    p = float(p)
    out = Tensor(a.data**p)
    out.requires_grad = a.requires_grad
    if out.requires_grad:
        out._parents = (a,)
        out._backward = lambda g: _accum(a, g * p * a.data ** (p - 1.0))
    return out


def maximum(a, b):
    """Elementwise max; on ties the gradient goes to the first argument."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data >= b.data
    out = Tensor(np.where(take_a, a.data, b.data))
    out.requires_grad = a.requires_grad or b.requires_grad
    if out.requires_grad:
        out._parents = (a, b)

        def bwd(g):
            _accum(a, _unbroadcast(g * take_a, a.shape))
            _accum(b, _unbroadcast(g * ~take_a, b.shape))

        out._backward = bwd
    return out


def minimum(a, b):
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data <= b.data
    out = Tensor(np.where(take_a, a.data, b.data))
    out.requires_grad = a.requires_grad or b.requires_grad
    if out.requires_grad:
        out._parents = (a, b)

        def bwd(g):
            _accum(a, _unbroadcast(g * take_a, a.shape))
            _accum(b, _unbroadcast(g * ~take_a, b.shape))

        out._backward = bwd
    return out


def where(cond, a, b):
    """Select per element from a constant boolean mask; differentiable in a, b."""
    cond = np.asarray(cond, dtype=bool)
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(np.where(cond, a.data, b.data))
    out.requires_grad = a.requires_grad or b.requires_grad
    if out.requires_grad:
        out._parents = (a, b)

        def bwd(g):
            _accum(a, _unbroadcast(g * cond, a.shape))
            _accum(b, _unbroadcast(g * ~cond, b.shape))

        out._backward = bwd
    return out


# ---- elementwise unary ops ---------------------------------------------------


def _unary(a, value, dvalue):
    a = as_tensor(a)
    out = Tensor(value)
    out.requires_grad = a.requires_grad
    if out.requires_grad:
        out._parents = (a,)
        out._backward = lambda g: _accum(a, g * dvalue)
    return out


def exp(a):
    a = as_tensor(a)
    v = np.exp(a.data)
    return _unary(a, v, v)


def log(a):
    a = as_tensor(a)
    return _unary(a, np.log(a.data), 1.0 / a.data)


def sqrt(a):
    a = as_tensor(a)
    v = np.sqrt(a.data)
    return _unary(a, v, 0.5 / v)


def sin(a):
    a = as_tensor(a)
    return _unary(a, np.sin(a.data), np.cos(a.data))


def cos(a):
    a = as_tensor(a)
    return _unary(a, np.cos(a.data), -np.sin(a.data))


def tanh(a):
    a = as_tensor(a)
    v = np.tanh(a.data)
    return _unary(a, v, 1.0 - v * v)


def sigmoid(a):
    a = as_tensor(a)
    v = 1.0 / (1.0 + np.exp(-a.data))
    return _unary(a, v, v * (1.0 - v))


def abs_(a):
    """|a| with subgradient 0 at 0 (np.sign(0) == 0)."""
    a = as_tensor(a)
    return _unary(a, np.abs(a.data), np.sign(a.data))


def relu(a):
    a = as_tensor(a)
    m = a.data > 0
    return _unary(a, a.data * m, m.astype(np.float64))


def leaky_relu(a, slope=0.1):
    a = as_tensor(a)
    d = np.where(a.data > 0, 1.0, slope)
    return _unary(a, np.where(a.data > 0, a.data, slope * a.data), d)


def softplus(a):
    """log(1 + exp(a)), computed stably; derivative is sigmoid(a)."""
    a = as_tensor(a)
    v = np.logaddexp(0.0, a.data)
    return _unary(a, v, 1.0 / (1.0 + np.exp(-a.data)))


def clamp_min(a, lo):
    """max(a, lo) for scalar lo; gradient 0 where clamped, 1 on the boundary."""
    a = as_tensor(a)
    m = a.data >= lo
    return _unary(a, np.where(m, a.data, lo), m.astype(np.float64))


# ---- reductions --------------------------------------------------------------


def sum_(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))
    out.requires_grad = a.requires_grad
    if out.requires_grad:
        out._parents = (a,)

        def bwd(g):
            gg = g
            if axis is not None and not keepdims:
                gg = np.expand_dims(gg, axis)
            _accum(a, np.broadcast_to(gg, a.shape).copy())

        out._backward = bwd
    return out


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    n = a.size if axis is None else np.prod(
        [a.shape[i] for i in np.atleast_1d(axis)]
    )
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


# ---- shape / indexing ----------------------------------------------------------


def reshape(a, shape):
    a = as_tensor(a)
    out = Tensor(a.data.reshape(shape))
    out.requires_grad = a.requires_grad
    if out.requires_grad:
        out._parents = (a,)
        out._backward = lambda g: _accum(a, g.reshape(a.shape))
    return out


def transpose(a, axes=None):
    a = as_tensor(a)
    out = Tensor(a.data.transpose(axes))
    out.requires_grad = a.requires_grad
    if out.requires_grad:
        out._parents = (a,)
        inv = None if axes is None else tuple(np.argsort(axes))
        out._backward = lambda g: _accum(a, g.transpose(inv))
    return out


def getitem(a, key):
    """Basic and integer-array indexing; backward scatters (with repeats summed)."""
    a = as_tensor(a)
    out = Tensor(a.data[key])
    out.requires_grad = a.requires_grad
    if out.requires_grad:
        out._parents = (a,)

        def bwd(g):
            buf = np.zeros_like(a.data)
            np.add.at(buf, key, g)
            _accum(a, buf)

        out._backward = bwd
    return out


def take(a, indices, axis=0):
    """Gather rows along an axis by an integer index array."""
    a = as_tensor(a)
    indices = np.asarray(indices)
    out = Tensor(np.take(a.data, indices, axis=axis))
    out.requires_grad = a.requires_grad
    if out.requires_grad:
        out._parents = (a,)

        def bwd(g):
            buf = np.zeros_like(a.data)
            if axis == 0:
                np.add.at(buf, indices, g)
            else:
                key = (slice(None),) * axis + (indices,)
                np.add.at(buf, key, g)
            _accum(a, buf)

        out._backward = bwd
    return out


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    out.requires_grad = any(t.requires_grad for t in tensors)
    if out.requires_grad:
        out._parents = tuple(tensors)
        sizes = [t.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)

        def bwd(g):
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                sl = (slice(None),) * axis + (slice(lo, hi),)
                _accum(t, g[sl])

        out._backward = bwd
    return out


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.stack([t.data for t in tensors], axis=axis))
    out.requires_grad = any(t.requires_grad for t in tensors)
    if out.requires_grad:
        out._parents = tuple(tensors)

        def bwd(g):
            for i, t in enumerate(tensors):
                sl = (slice(None),) * axis + (i,)
                _accum(t, g[sl])

        out._backward = bwd
    return out


def matmul(a, b):
    """Matrix product; operands must be >= 2-D (batch dims broadcast)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul operands must be at least 2-D; reshape first")
    out = Tensor(a.data @ b.data)
    out.requires_grad = a.requires_grad or b.requires_grad
    if out.requires_grad:
        out._parents = (a, b)

        def bwd(g):
            ga = g @ np.swapaxes(b.data, -1, -2)
            gb = np.swapaxes(a.data, -1, -2) @ g
            _accum(a, _unbroadcast(ga, a.shape))
            _accum(b, _unbroadcast(gb, b.shape))

        out._backward = bwd
    return out


def dot(a, b):
    """Inner product of two 1-D tensors -> scalar tensor."""
    a, b = as_tensor(a), as_tensor(b)
    return sum_(mul(a, b))
