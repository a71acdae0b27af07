"""Small reverse-mode autodiff engine over numpy arrays.

Only the operations the completion model needs are provided: broadcasting
arithmetic, batched matmul, reshapes/slicing, softmax, layer norm, GELU and
the heatmap KL loss.  Every op checks its forward output for NaN/Inf and
raises :class:`NonFiniteError` instead of propagating it.

Gradients are accumulated without in-place mutation, so a gradient array
handed to two parents is never aliased.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np

from .errors import NonFiniteError, OptimizationError, ShapeError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction (inference only)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _check_finite(data, op):
    # a NaN/Inf anywhere makes the sum non-finite; recheck to rule out overflow of the sum itself
    with np.errstate(over="ignore", invalid="ignore"):
        total = data.sum()
    if not np.isfinite(total) and not np.isfinite(data).all():
        raise NonFiniteError(f"non-finite values produced by {op}")


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff > 0:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _as_array(x, dtype=None):
    if isinstance(x, Tensor):
        return x.data
    return np.asarray(x, dtype=dtype)


class Tensor:
    """A node in the computation graph.

    ``data`` is a numpy array; ``grad`` is filled by :meth:`backward` for
    every node that requires a gradient.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad=False, _parents=(), op="leaf"):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = None
        self.op = op

    # -- basic properties -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op!r})"

    # -- graph plumbing ---------------------------------------------------
    @staticmethod
    def _make(data, parents, op, backward):
        _check_finite(data, op)
        needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
        out = Tensor(data, requires_grad=needs, _parents=parents if needs else (), op=op)
        if needs:
            out._backward = backward
        return out

    def _accumulate(self, g):
        self.grad = g if self.grad is None else self.grad + g

    def backward(self, grad=None):
        """Backpropagate from this node; visits each graph node once."""
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without a seed needs a scalar, got {self.shape}")
            grad = np.ones_like(self.data)
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
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def zero_grad(self):
        self.grad = None

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(np.asarray(other, self.dtype))
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g, b.shape))

        return Tensor._make(a.data + b.data, (a, b), "add", backward)

    __radd__ = __add__

    def __neg__(self):
        a = self

        def backward(g):
            a._accumulate(-g)

        return Tensor._make(-a.data, (a,), "neg", backward)

    def __sub__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(np.asarray(other, self.dtype))
        return self + (-other)

    def __rsub__(self, other):
        return Tensor(np.asarray(other, self.dtype)) + (-self)

    def __mul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(np.asarray(other, self.dtype))
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.shape))

        return Tensor._make(a.data * b.data, (a, b), "mul", backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return self * other.pow(-1.0)
        return self * (1.0 / other)

    def pow(self, exponent):
        a = self
        e = float(exponent)

        def backward(g):
            a._accumulate(g * e * a.data ** (e - 1.0))

        return Tensor._make(a.data**e, (a,), "pow", backward)

    __pow__ = pow

    def __matmul__(self, other):
        return matmul(self, other)

    # -- elementwise functions --------------------------------------------
    def exp(self):
        a = self
        out_data = np.exp(a.data)

        def backward(g):
            a._accumulate(g * out_data)

        return Tensor._make(out_data, (a,), "exp", backward)

    def log(self):
        a = self
        with np.errstate(divide="ignore", invalid="ignore"):
            out_data = np.log(a.data)

        def backward(g):
            a._accumulate(g / a.data)

        return Tensor._make(out_data, (a,), "log", backward)

    # -- reductions and shape ops -----------------------------------------
    def sum(self, axis=None, keepdims=False):
        a = self

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.shape).copy())

        return Tensor._make(np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,), "sum", backward)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod([self.shape[i] for i in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self

        def backward(g):
            a._accumulate(g.reshape(a.shape))

        return Tensor._make(a.data.reshape(shape), (a,), "reshape", backward)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        a = self
        inv = np.argsort(axes)

        def backward(g):
            a._accumulate(g.transpose(inv))

        return Tensor._make(a.data.transpose(axes), (a,), "transpose", backward)

    def swapaxes(self, i, j):
        axes = list(range(self.ndim))
        axes[i], axes[j] = axes[j], axes[i]
        return self.transpose(tuple(axes))

    def __getitem__(self, idx):
        a = self
        parts = idx if isinstance(idx, tuple) else (idx,)
        advanced = any(isinstance(i, (list, np.ndarray)) for i in parts)

        def backward(g):
            full = np.zeros_like(a.data)
            if advanced:
                np.add.at(full, idx, g)
            else:
                full[idx] = g
            a._accumulate(full)

        return Tensor._make(np.asarray(a.data[idx]), (a,), "getitem", backward)


class Parameter(Tensor):
    """A trainable leaf tensor with a name and a gradient of the same shape."""

    __slots__ = ("name", "m", "v")

    def __init__(self, value, name="param"):
        super().__init__(np.array(value, copy=True), requires_grad=True, op="param")
        self.name = name
        self.grad = np.zeros_like(self.data)
        self.m = None
        self.v = None

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def tensor(data, dtype=np.float64, requires_grad=False):
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=requires_grad)


# -- free-standing ops -----------------------------------------------------
def matmul(a, b):
    """Batched matrix product with broadcasting over leading dimensions."""
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = b if isinstance(b, Tensor) else Tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs operands with ndim >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    try:
        out_data = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"matmul cannot broadcast {a.shape} @ {b.shape}") from exc

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape))

    return Tensor._make(out_data, (a, b), "matmul", backward)


def concat(tensors, axis=0):
    tensors = [t if isinstance(t, Tensor) else Tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor._make(data, tuple(tensors), "concat", backward)


def softmax(x, axis=-1):
    """Max-subtracted softmax along ``axis``."""
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        x._accumulate(s * (g - (g * s).sum(axis=axis, keepdims=True)))

    return Tensor._make(s, (x,), "softmax", backward)


def layer_norm(x, gamma, beta, eps=1e-5):
    """Layer normalization over the last axis."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    n = x.shape[-1]

    def backward(g):
        if gamma.requires_grad:
            gamma._accumulate(_unbroadcast(g * xhat, gamma.shape))
        if beta.requires_grad:
            beta._accumulate(_unbroadcast(g, beta.shape))
        if x.requires_grad:
            dxhat = g * gamma.data
            x._accumulate(
                inv
                / n
                * (
                    n * dxhat
                    - dxhat.sum(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
                )
            )

    return Tensor._make(xhat * gamma.data + beta.data, (x, gamma, beta), "layer_norm", backward)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x):
    """GELU, tanh approximation."""
    u = _GELU_C * (x.data + 0.044715 * x.data**3)
    t = np.tanh(u)
    out = 0.5 * x.data * (1.0 + t)

    def backward(g):
        du = _GELU_C * (1.0 + 3 * 0.044715 * x.data**2)
        x._accumulate(g * (0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t * t) * du))

    return Tensor._make(out, (x,), "gelu", backward)


def kl_loss(predicted, target, eps=1e-8, reverse=False):
    """Summed KL divergence between heatmap stacks.

    The default direction is ``sum P log(P / Q)`` with ``P`` the prediction.
    Both distributions are clamped below at ``eps`` inside the logarithm,
    so identical stacks give exactly zero only when no cell falls below
    ``eps``.  ``reverse=True`` computes ``sum Q log(Q / P)`` instead.
    """
    predicted = predicted if isinstance(predicted, Tensor) else Tensor(predicted)
    q = _as_array(target).astype(predicted.dtype, copy=False)
    if q.shape != predicted.shape:
        raise ShapeError(f"kl_loss shape mismatch: predicted {predicted.shape} vs target {q.shape}")
    p = predicted.data
    pc = np.maximum(p, eps)
    qc = np.maximum(q, eps)
    if reverse:
        value = np.sum(q * (np.log(qc) - np.log(pc)))

        def backward(g):
            predicted._accumulate(g * np.where(p > eps, -q / pc, 0.0))

    else:
        log_ratio = np.log(pc) - np.log(qc)
        value = np.sum(p * log_ratio)

        def backward(g):
            predicted._accumulate(g * (log_ratio + (p > eps)))

    return Tensor._make(np.asarray(value, dtype=p.dtype), (predicted,), "kl_loss", backward)


def adamw_step(params, lr, weight_decay, betas=(0.9, 0.999), step_count=1, eps=1e-8):
    """One AdamW update with decoupled weight decay.

    ``step_count`` is 1-based and drives the bias correction.  Moments live
    on the parameters themselves.
    """
    b1, b2 = betas
    for p in params:
        if not np.isfinite(p.grad).all():
            raise OptimizationError(f"non-finite gradient for parameter {p.name!r}")
    c1 = 1.0 - b1**step_count
    c2 = 1.0 - b2**step_count
    for p in params:
        g = p.grad
        if p.m is None:
            p.m = np.zeros_like(p.data)
            p.v = np.zeros_like(p.data)
        p.m = b1 * p.m + (1.0 - b1) * g
        p.v = b2 * p.v + (1.0 - b2) * g * g
        if weight_decay:
            p.data = p.data * (1.0 - lr * weight_decay)
        update = (p.m / c1) / (np.sqrt(p.v / c2) + eps)
        p.data = (p.data - lr * update).astype(p.data.dtype, copy=False)


class AdamW:
    """Stateful wrapper tracking the step count."""

    def __init__(self, params, lr=1e-4, weight_decay=0.07, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.betas = tuple(betas)
        self.eps = eps
        self.step_count = 0

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.step_count += 1
        adamw_step(self.params, self.lr, self.weight_decay, self.betas, self.step_count, self.eps)
