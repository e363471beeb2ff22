"""Reverse-mode automatic differentiation over dense float64 numpy arrays.

A computation graph is built dynamically as operations execute. Calling
``backward`` on a scalar root propagates adjoints through the graph and
accumulates (+=) gradients into leaf tensors created with
``requires_grad=True``. Interior adjoints live only for the duration of
one backward pass, so repeated backward calls without zeroing add the
same gradient again. Graphs are freed when the last reference to their
tensors is dropped.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import ContractError, DomainError, ShapeError

_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables graph construction (values only)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    """Dense float64 array participating in the differentiation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False):
        if isinstance(data, np.ndarray) and data.dtype == np.float64:
            self.data = data
        else:
            self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._vjp = None

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
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # arithmetic operators

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, *shape)

    def backward(self):
        backward(self)


def lift(x):
    """Wrap a scalar or ndarray as a constant Tensor; pass Tensors through."""
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, vjp):
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


def _unbroadcast(g, shape):
    # reduce a broadcast gradient back to the operand's shape
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a, b):
    a, b = lift(a), lift(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}") from None
    ash, bsh = a.data.shape, b.data.shape
    return _result(data, (a, b), lambda g: (_unbroadcast(g, ash), _unbroadcast(g, bsh)))


def sub(a, b):
    a, b = lift(a), lift(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}") from None
    ash, bsh = a.data.shape, b.data.shape
    return _result(data, (a, b), lambda g: (_unbroadcast(g, ash), _unbroadcast(-g, bsh)))


def mul(a, b):
    a, b = lift(a), lift(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}") from None
    ad, bd = a.data, b.data
    return _result(
        data,
        (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
    )


def div(a, b):
    a, b = lift(a), lift(b)
    try:
        data = a.data / b.data
    except ValueError:
        raise ShapeError(f"div: incompatible shapes {a.shape} and {b.shape}") from None
    ad, bd = a.data, b.data
    return _result(
        data,
        (a, b),
        lambda g: (
            _unbroadcast(g / bd, ad.shape),
            _unbroadcast(-g * ad / (bd * bd), bd.shape),
        ),
    )


def neg(a):
    a = lift(a)
    return _result(-a.data, (a,), lambda g: (-g,))


def matmul(a, b):
    a, b = lift(a), lift(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    return _result(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def tanh(a):
    a = lift(a)
    y = np.tanh(a.data)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a):
    a = lift(a)
    y = expit(a.data)
    return _result(y, (a,), lambda g: (g * y * (1.0 - y),))


def exp(a):
    a = lift(a)
    y = np.exp(a.data)
    return _result(y, (a,), lambda g: (g * y,))


def log(a):
    a = lift(a)
    ad = a.data
    return _result(np.log(ad), (a,), lambda g: (g / ad,))


def _norm_axis(axis, ndim):
    if axis is None:
        return None
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def tsum(a, axis=None, keepdims=False):
    a = lift(a)
    axis = _norm_axis(axis, a.ndim)
    data = a.data.sum(axis=axis, keepdims=keepdims)
    shape = a.data.shape

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return _result(data, (a,), vjp)


def tmean(a, axis=None, keepdims=False):
    a = lift(a)
    axes = _norm_axis(axis, a.ndim)
    if axes is None:
        n = a.size
    else:
        n = 1
        for ax in axes:
            n *= a.shape[ax]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(a, *shape):
    a = lift(a)
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = tuple(shape[0])
    old = a.data.shape
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(tensors, axis=-1):
    tensors = [lift(t) for t in tensors]
    if not tensors:
        raise ContractError("concat: need at least one tensor")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    ax = axis % data.ndim
    sizes = [t.data.shape[ax] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, offsets, axis=ax))

    return _result(data, tuple(tensors), vjp)


def stack(tensors, axis=0):
    tensors = [lift(t) for t in tensors]
    if not tensors:
        raise ContractError("stack: need at least one tensor")
    data = np.stack([t.data for t in tensors], axis=axis)

    def vjp(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _result(data, tuple(tensors), vjp)


def _has_array_index(idx):
    if isinstance(idx, tuple):
        return any(isinstance(i, (np.ndarray, list)) for i in idx)
    return isinstance(idx, (np.ndarray, list))


def take(a, idx):
    """Index into a tensor; duplicate advanced indices accumulate gradient."""
    a = lift(a)
    data = a.data[idx]
    shape = a.data.shape
    advanced = _has_array_index(idx)

    def vjp(g):
        z = np.zeros(shape)
        if advanced:
            np.add.at(z, idx, g)
        else:
            z[idx] += g
        return (z,)

    return _result(data, (a,), vjp)


def softmax(a, axis=-1, mask=None):
    """Probability normalization with max-subtraction for stability.

    ``mask`` is a boolean ndarray broadcastable to the input; masked-out
    entries get zero probability and zero gradient. Rows must keep at
    least one unmasked entry.
    """
    a = lift(a)
    if a.ndim == 0 or a.shape[axis % a.ndim] == 0:
        raise DomainError(f"softmax: empty input of shape {a.shape}")
    z = a.data
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), z.shape)
        if not mask.any(axis=axis).all():
            raise ContractError("softmax: a row has no unmasked entries")
        z = np.where(mask, z, -np.inf)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        gx = y * (g - (g * y).sum(axis=axis, keepdims=True))
        return (gx,)

    return _result(y, (a,), vjp)


def _toposort(root):
    order, seen = [], set()
    stack = [(root, False)]
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
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root):
    """Propagate gradients from a scalar root into reachable leaf tensors."""
    if root.size != 1:
        raise ContractError(f"backward: root must be scalar, got shape {root.shape}")
    if not root.requires_grad:
        return
    order = _toposort(root)
    adjoint = {id(root): np.ones_like(root.data)}
    for node in reversed(order):
        g = adjoint.pop(id(node), None)
        if g is None:
            continue
        if node._vjp is None:
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
            node.grad += g
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            pid = id(parent)
            if pid in adjoint:
                adjoint[pid] = adjoint[pid] + pg
            else:
                adjoint[pid] = pg


def zero_grads(tensors):
    for t in tensors:
        t.grad = None


def zeros(shape, requires_grad=False):
    return Tensor(np.zeros(shape), requires_grad=requires_grad)
