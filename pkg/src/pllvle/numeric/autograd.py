"""Reverse-mode gradients over a small closed set of array operations.

Only the operations defined in this module exist; each one records its
parents and a backward rule. Leaves created by :meth:`ParamStore.tensor`
carry a *sink*, the parameter's gradient buffer, which receives the
accumulated gradient when :meth:`Tensor.backward` runs.

    >>> x = Tensor(np.array([3.0]), sink=np.zeros(1))
    >>> (x * x).sum().backward()
    >>> x.sink
    array([6.])
"""
import numpy as np
import scipy.sparse as sp

from . import special


class Tensor:
    __array_priority__ = 100

    def __init__(self, value, parents=(), backward=None, sink=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self._backward = backward
        self.sink = sink
        self.grad = None
        self.requires_grad = sink is not None or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.value.shape

    def item(self):
        return float(self.value)

    def detach(self):
        return Tensor(self.value)

    def backward(self, seed=None):
        if self.value.size != 1 and seed is None:
            raise ValueError("backward() without a seed needs a scalar tensor")
        order = _topological(self)
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.value) if seed is None else np.asarray(seed, dtype=np.float64)
        for node in reversed(order):
            if node.grad is None:
                continue
            if node.sink is not None:
                node.sink += node.grad
            if node._backward is None:
                continue
            grads = node._backward(node.grad)
            for parent, g in zip(node.parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g

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

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division only by constants")
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def sum(self, axis=None, keepdims=False):
        return total(self, axis=axis, keepdims=keepdims)

    def mean(self):
        return mul(total(self), 1.0 / self.value.size)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _topological(root):
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and grad.shape[i] != 1:
            grad = grad.sum(axis=i, keepdims=True)
    return grad


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.value * b.value,
        (a, b),
        lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
    )


def matmul(a, b):
    """Matrix product; either side may also be a constant scipy sparse matrix."""
    if sp.issparse(a):
        b = as_tensor(b)
        at = a.T.tocsr()
        return Tensor(np.asarray(a @ b.value), (b,), lambda g: (np.asarray(at @ g),))
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(
        a.value @ b.value,
        (a, b),
        lambda g: (g @ b.value.T, a.value.T @ g),
    )


def relu(a):
    a = as_tensor(a)
    mask = a.value > 0
    return Tensor(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a):
    a = as_tensor(a)
    s = _sigmoid(a.value)
    return Tensor(s, (a,), lambda g: (g * s * (1.0 - s),))


def _sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def softplus(a):
    a = as_tensor(a)
    x = a.value
    val = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return Tensor(val, (a,), lambda g: (g * _sigmoid(x),))


def exp(a):
    a = as_tensor(a)
    e = np.exp(a.value)
    return Tensor(e, (a,), lambda g: (g * e,))


def log(a, floor=None):
    """Natural log; with ``floor`` the input is clamped below and the clamp
    passes no gradient."""
    a = as_tensor(a)
    x = a.value
    if floor is None:
        return Tensor(np.log(x), (a,), lambda g: (g / x,))
    live = x > floor
    safe = np.where(live, x, floor)
    return Tensor(np.log(safe), (a,), lambda g: (np.where(live, g / safe, 0.0),))


def log_softmax(a):
    """Row-wise log-softmax of a 2-D tensor."""
    a = as_tensor(a)
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out = shifted - lse
    p = np.exp(out)
    return Tensor(out, (a,), lambda g: (g - p * g.sum(axis=1, keepdims=True),))


def softmax(a):
    a = as_tensor(a)
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)
    return Tensor(p, (a,), lambda g: (p * (g - (g * p).sum(axis=1, keepdims=True)),))


def total(a, axis=None, keepdims=False):
    a = as_tensor(a)
    val = a.value.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Tensor(val, (a,), back)


def row_sum(a):
    return total(a, axis=1, keepdims=True)


def frobenius_sq(a):
    """Squared Frobenius norm."""
    a = as_tensor(a)
    return Tensor(np.sum(a.value * a.value), (a,), lambda g: (2.0 * g * a.value,))


def concat_cols(a, b):
    a, b = as_tensor(a), as_tensor(b)
    k = a.shape[1]
    return Tensor(
        np.concatenate([a.value, b.value], axis=1),
        (a, b),
        lambda g: (g[:, :k], g[:, k:]),
    )


def take_rows(a, idx):
    a = as_tensor(a)
    idx = np.asarray(idx)

    def back(g):
        full = np.zeros_like(a.value)
        np.add.at(full, idx, g)
        return (full,)

    return Tensor(a.value[idx], (a,), back)


def transpose(a):
    a = as_tensor(a)
    return Tensor(a.value.T, (a,), lambda g: (g.T,))


def lgamma(a):
    a = as_tensor(a)
    return Tensor(special.log_gamma(a.value), (a,), lambda g: (g * special.digamma(a.value),))


def digamma(a):
    a = as_tensor(a)
    return Tensor(special.digamma(a.value), (a,), lambda g: (g * special.trigamma(a.value),))


def custom(value, parents, backward):
    """Wrap an operation whose backward rule is supplied by the caller."""
    return Tensor(value, tuple(parents), backward)
