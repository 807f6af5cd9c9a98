"""Reverse-mode automatic differentiation over dense 64-bit tensors.

Every operation that touches a gradient-requiring tensor records its parents
and a backward closure on the result; backward() walks the recorded graph in
reverse topological order, which visits each node exactly once and sums
gradients along every path. That recorded structure is the tape.
"""

import numpy as np

from ..exceptions import DetachedTensor, NotScalarLoss, ShapeMismatch


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data.copy())

    # -- graph construction ------------------------------------------------

    def _make(self, data, parents, backward):
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def backward(self):
        if self.data.size != 1:
            raise NotScalarLoss(f"backward needs a scalar, got shape {self.data.shape}")
        if not self.requires_grad:
            raise DetachedTensor("loss does not depend on any gradient-requiring tensor")
        order = []
        seen = set()
        stack = [(self, False)]
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        for node in order:
            node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        other = _wrap(other)
        data = _broadcast_op(np.add, self.data, other.data)

        def backward(g):
            _accumulate(self, _unbroadcast(g, self.data.shape))
            _accumulate(other, _unbroadcast(g, other.data.shape))

        return self._make(data, (self, other), backward)

    __radd__ = __add__

    def __sub__(self, other):
        other = _wrap(other)
        data = _broadcast_op(np.subtract, self.data, other.data)

        def backward(g):
            _accumulate(self, _unbroadcast(g, self.data.shape))
            _accumulate(other, _unbroadcast(-g, other.data.shape))

        return self._make(data, (self, other), backward)

    def __rsub__(self, other):
        return _wrap(other) - self

    def __mul__(self, other):
        other = _wrap(other)
        data = _broadcast_op(np.multiply, self.data, other.data)

        def backward(g):
            _accumulate(self, _unbroadcast(g * other.data, self.data.shape))
            _accumulate(other, _unbroadcast(g * self.data, other.data.shape))

        return self._make(data, (self, other), backward)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __truediv__(self, other):
        other = _wrap(other)
        return self * other ** -1.0

    def __rtruediv__(self, other):
        return _wrap(other) / self

    def __pow__(self, exponent):
        if not np.isscalar(exponent):
            raise ShapeMismatch("power supports scalar exponents only")
        data = self.data ** exponent

        def backward(g):
            _accumulate(self, g * exponent * self.data ** (exponent - 1.0))

        return self._make(data, (self,), backward)

    def __matmul__(self, other):
        other = _wrap(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ShapeMismatch(
                f"matmul needs 2-D operands, got {self.data.shape} @ {other.data.shape}"
            )
        if self.data.shape[1] != other.data.shape[0]:
            raise ShapeMismatch(
                f"matmul inner dimensions differ: {self.data.shape} @ {other.data.shape}"
            )
        data = self.data @ other.data

        def backward(g):
            _accumulate(self, g @ other.data.T)
            _accumulate(other, self.data.T @ g)

        return self._make(data, (self, other), backward)

    # -- reductions ----------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        data = self.data.sum(axis=axis, keepdims=keepdims)

        def backward(g):
            _accumulate(self, _expand_reduced(g, self.data.shape, axis, keepdims))

        return self._make(data, (self,), backward)

    def mean(self, axis=None, keepdims=False):
        data = self.data.mean(axis=axis, keepdims=keepdims)
        count = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in _axes_tuple(axis, self.data.ndim)]
        )

        def backward(g):
            _accumulate(
                self, _expand_reduced(g, self.data.shape, axis, keepdims) / count
            )

        return self._make(data, (self,), backward)

    # -- elementwise nonlinearities -------------------------------------

    def exp(self):
        data = np.exp(self.data)

        def backward(g):
            _accumulate(self, g * data)

        return self._make(data, (self,), backward)

    def log(self):
        data = np.log(self.data)

        def backward(g):
            _accumulate(self, g / self.data)

        return self._make(data, (self,), backward)

    def tanh(self):
        data = np.tanh(self.data)

        def backward(g):
            _accumulate(self, g * (1.0 - data * data))

        return self._make(data, (self,), backward)

    def sigmoid(self):
        data = 1.0 / (1.0 + np.exp(-self.data))

        def backward(g):
            _accumulate(self, g * data * (1.0 - data))

        return self._make(data, (self,), backward)

    def relu(self):
        data = np.maximum(self.data, 0.0)

        def backward(g):
            _accumulate(self, g * (self.data > 0.0))

        return self._make(data, (self,), backward)

    def elu(self, alpha=1.0):
        data = np.where(self.data > 0.0, self.data, alpha * (np.exp(self.data) - 1.0))

        def backward(g):
            _accumulate(self, g * np.where(self.data > 0.0, 1.0, data + alpha))

        return self._make(data, (self,), backward)

    def softmax(self, axis=-1):
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        data = e / e.sum(axis=axis, keepdims=True)

        def backward(g):
            inner = (g * data).sum(axis=axis, keepdims=True)
            _accumulate(self, data * (g - inner))

        return self._make(data, (self,), backward)

    def log_softmax(self, axis=-1):
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        data = shifted - log_z

        def backward(g):
            soft = np.exp(data)
            _accumulate(self, g - soft * g.sum(axis=axis, keepdims=True))

        return self._make(data, (self,), backward)


def _wrap(value):
    return value if isinstance(value, Tensor) else Tensor(np.asarray(value, dtype=np.float64))


def _accumulate(tensor, g):
    if tensor.requires_grad and tensor.grad is not None:
        tensor.grad += g


def _broadcast_op(op, a, b):
    try:
        return op(a, b)
    except ValueError as err:
        raise ShapeMismatch(f"shapes {a.shape} and {b.shape} do not broadcast") from err


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _axes_tuple(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        return (axis % ndim,)
    return tuple(a % ndim for a in axis)


def _expand_reduced(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape).copy() if keepdims else np.full(shape, g)
    if not keepdims:
        g = np.expand_dims(g, _axes_tuple(axis, len(shape)))
    return np.broadcast_to(g, shape).copy()


def concat(tensors, axis=0):
    """Concatenate along an axis; the backward pass splits the gradient."""
    datas = [t.data for t in tensors]
    data = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(start, stop)
            _accumulate(t, g[tuple(sl)])

    out = Tensor(data)
    if any(t.requires_grad for t in tensors):
        out.requires_grad = True
        out._parents = tuple(tensors)
        out._backward = backward
    return out
