"""Dense float64 tensors with tape-based reverse-mode differentiation.

Shapes are limited to what small MLPs need: scalars (0-d), vectors and
matrices, with broadcasting restricted to matrix+row-vector and
tensor+scalar.  A :class:`Tape` is opened per forward pass (define-by-run);
ops performed while a tape is active record their backward closures on it,
and ``tape.gradients(loss)`` replays the recording once in reverse.
"""

from __future__ import annotations

import threading

import numpy as np

from ..errors import ContractError, DimensionError
from . import backend

_DEBUG_CHECKS = False


def set_debug_checks(enabled):
    """When enabled, every op output is asserted finite (slow; tests only)."""
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = bool(enabled)


class Tensor:
    """Immutable dense array of 64-bit floats.

    ``data`` is never mutated by ops; the only sanctioned in-place writes
    are optimizer updates to parameter tensors between forward passes.
    """

    __slots__ = ("data", "requires_grad")

    def __init__(self, values, requires_grad=False):
        data = np.asarray(values, dtype=np.float64)
        if data.ndim > 2:
            raise DimensionError(f"tensors are at most 2-D, got shape {data.shape}")
        self.data = data
        self.requires_grad = bool(requires_grad)
        if _DEBUG_CHECKS and not np.isfinite(data).all():
            raise ContractError("non-finite values in tensor")

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
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of size {self.data.size}")
        return float(self.data.reshape(()))

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; all arithmetic goes through the module-level ops.
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

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


_tls = threading.local()


def _tape_stack():
    stack = getattr(_tls, "stack", None)
    if stack is None:
        stack = []
        _tls.stack = stack
    return stack


def _current_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tape:
    """Recorded operation graph for one forward pass.

    Nodes are appended in execution order, which is a topological order,
    so the reverse sweep in :meth:`gradients` visits each node exactly
    once.  Tapes are single-use: build a fresh one per forward pass.
    """

    def __init__(self):
        self._nodes = []

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _tape_stack().pop()
        assert popped is self
        return False

    def _record(self, out, parents, backward):
        self._nodes.append((id(out), out, parents, backward))

    def __len__(self):
        return len(self._nodes)

    def gradients(self, loss):
        """d(loss)/d(leaf) for every requires_grad tensor the loss touches."""
        if not isinstance(loss, Tensor):
            raise ContractError("loss must be a Tensor")
        if loss.size != 1:
            raise ContractError(f"loss must be scalar, got shape {loss.shape}")
        grads = {id(loss): (loss, np.ones_like(loss.data))}
        for out_id, _out, parents, backward in reversed(self._nodes):
            entry = grads.pop(out_id, None)
            if entry is None:
                continue
            for parent, pgrad in zip(parents, backward(entry[1])):
                if pgrad is None or not parent.requires_grad:
                    continue
                acc = grads.get(id(parent))
                if acc is None:
                    grads[id(parent)] = (parent, pgrad)
                else:
                    grads[id(parent)] = (parent, acc[1] + pgrad)
        return Grads(grads)


class Grads:
    """Gradient lookup keyed by tensor identity."""

    def __init__(self, by_id):
        self._by_id = by_id

    def get(self, tensor, default=None):
        entry = self._by_id.get(id(tensor))
        return entry[1] if entry is not None else default

    def __getitem__(self, tensor):
        entry = self._by_id.get(id(tensor))
        if entry is None:
            raise KeyError("no gradient recorded for tensor")
        return entry[1]

    def __contains__(self, tensor):
        return id(tensor) in self._by_id


def _ensure(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(out_data, parents, backward):
    requires = any(p.requires_grad for p in parents)
    out = Tensor(out_data, requires_grad=requires)
    if requires:
        tape = _current_tape()
        if tape is not None:
            tape._record(out, parents, backward)
    return out


# -- broadcasting for binary elementwise ops ------------------------------

_SAME, _ROW_B, _ROW_A, _SCALAR_B, _SCALAR_A = range(5)


def _bcast_kind(a, b):
    sa, sb = a.shape, b.shape
    if sa == sb:
        return _SAME
    if b.ndim == 0:
        return _SCALAR_B
    if a.ndim == 0:
        return _SCALAR_A
    if a.ndim == 2 and b.ndim == 1 and sa[1] == sb[0]:
        return _ROW_B
    if b.ndim == 2 and a.ndim == 1 and sb[1] == sa[0]:
        return _ROW_A
    raise DimensionError(f"incompatible shapes {sa} and {sb}")


def _reduce_to(g, kind, side):
    """Sum the output gradient back down to the operand's shape."""
    K = backend.kernels
    if kind == _SAME:
        return g
    if kind == _SCALAR_B:
        return g if side == 0 else np.asarray(g.sum())
    if kind == _SCALAR_A:
        return np.asarray(g.sum()) if side == 0 else g
    if kind == _ROW_B:
        return g if side == 0 else K.bias_grad(g)
    return K.bias_grad(g) if side == 0 else g


def add(a, b):
    a, b = _ensure(a), _ensure(b)
    kind = _bcast_kind(a, b)
    out = a.data + b.data

    def bw(g):
        return (_reduce_to(g, kind, 0), _reduce_to(g, kind, 1))

    return _make(out, (a, b), bw)


def sub(a, b):
    a, b = _ensure(a), _ensure(b)
    kind = _bcast_kind(a, b)
    out = a.data - b.data

    def bw(g):
        return (_reduce_to(g, kind, 0), _reduce_to(-g, kind, 1))

    return _make(out, (a, b), bw)


def mul(a, b):
    a, b = _ensure(a), _ensure(b)
    kind = _bcast_kind(a, b)
    out = a.data * b.data
    ad, bd = a.data, b.data

    def bw(g):
        return (_reduce_to(g * bd, kind, 0), _reduce_to(g * ad, kind, 1))

    return _make(out, (a, b), bw)


def div(a, b):
    a, b = _ensure(a), _ensure(b)
    kind = _bcast_kind(a, b)
    out = a.data / b.data
    ad, bd = a.data, b.data

    def bw(g):
        return (
            _reduce_to(g / bd, kind, 0),
            _reduce_to(-g * ad / (bd * bd), kind, 1),
        )

    return _make(out, (a, b), bw)


def neg(a):
    a = _ensure(a)

    def bw(g):
        return (-g,)

    return _make(-a.data, (a,), bw)


def matmul(a, b):
    a, b = _ensure(a), _ensure(b)
    K = backend.kernels
    ad, bd = a.data, b.data
    if ad.ndim == 2 and bd.ndim == 2:
        if ad.shape[1] != bd.shape[0]:
            raise DimensionError(f"matmul {ad.shape} @ {bd.shape}")
        out = K.matmul(ad, bd)

        def bw(g):
            return (K.matmul(g, bd.T), K.matmul(ad.T, g))

    elif ad.ndim == 2 and bd.ndim == 1:
        if ad.shape[1] != bd.shape[0]:
            raise DimensionError(f"matmul {ad.shape} @ {bd.shape}")
        out = K.matmul(ad, bd[:, None])[:, 0]

        def bw(g):
            return (np.outer(g, bd), K.matmul(ad.T, g[:, None])[:, 0])

    elif ad.ndim == 1 and bd.ndim == 2:
        if ad.shape[0] != bd.shape[0]:
            raise DimensionError(f"matmul {ad.shape} @ {bd.shape}")
        out = K.matmul(ad[None, :], bd)[0]

        def bw(g):
            return (K.matmul(bd, g[:, None])[:, 0], np.outer(ad, g))

    else:
        raise DimensionError(f"matmul needs matrices/vectors, got {ad.shape} @ {bd.shape}")
    return _make(out, (a, b), bw)


def leaky_relu(a, slope=0.01):
    if not 0.0 < slope < 1.0:
        raise ContractError(f"leaky_relu slope must be in (0,1), got {slope}")
    a = _ensure(a)
    K = backend.kernels
    ad = a.data
    out = K.leaky_relu(ad, slope)

    def bw(g):
        return (K.leaky_relu_grad(ad, g, slope),)

    return _make(out, (a,), bw)


def tanh(a):
    a = _ensure(a)
    K = backend.kernels
    out = K.tanh(a.data)

    def bw(g):
        return (K.tanh_grad(out, g),)

    return _make(out, (a,), bw)


def logistic(a):
    a = _ensure(a)
    K = backend.kernels
    out = K.logistic(a.data)

    def bw(g):
        return (K.logistic_grad(out, g),)

    return _make(out, (a,), bw)


def softplus(a):
    a = _ensure(a)
    K = backend.kernels
    ad = a.data

    def bw(g):
        return (K.softplus_grad(ad, g),)

    return _make(K.softplus(ad), (a,), bw)


def exp(a):
    a = _ensure(a)
    out = np.exp(a.data)

    def bw(g):
        return (g * out,)

    return _make(out, (a,), bw)


def log(a):
    a = _ensure(a)
    ad = a.data
    if np.any(ad <= 0.0):
        raise ContractError("log requires strictly positive input; clamp first")

    def bw(g):
        return (g / ad,)

    return _make(np.log(ad), (a,), bw)


def clamp(a, lo=None, hi=None):
    """Clip values to [lo, hi]; gradient passes through inside the range
    (inclusive) and is zero where the input was clipped."""
    a = _ensure(a)
    ad = a.data
    out = np.clip(ad, lo, hi)
    mask = np.ones_like(ad)
    if lo is not None:
        mask *= ad >= lo
    if hi is not None:
        mask *= ad <= hi

    def bw(g):
        return (g * mask,)

    return _make(out, (a,), bw)


def minimum(a, b):
    """Elementwise minimum of same-shape tensors; subgradient follows the
    smaller operand (ties go to the first)."""
    a, b = _ensure(a), _ensure(b)
    if a.shape != b.shape:
        raise DimensionError(f"minimum needs equal shapes, got {a.shape}, {b.shape}")
    take_a = a.data <= b.data
    out = np.where(take_a, a.data, b.data)

    def bw(g):
        return (g * take_a, g * ~take_a)

    return _make(out, (a, b), bw)


def _sum_impl(a, axis, mean):
    a = _ensure(a)
    ad = a.data
    if axis is not None and (ad.ndim == 0 or axis >= ad.ndim):
        raise DimensionError(f"axis {axis} out of range for shape {ad.shape}")
    n = ad.size if axis is None else ad.shape[axis]
    out = ad.sum(axis=axis)
    if mean:
        out = out / n
    shape = ad.shape

    def bw(g):
        scale = 1.0 / n if mean else 1.0
        if axis is None:
            return (np.full(shape, float(g) * scale),)
        ge = np.expand_dims(g, axis)
        return (np.broadcast_to(ge * scale, shape).copy(),)

    return _make(out, (a,), bw)


def tsum(a, axis=None):
    return _sum_impl(a, axis, mean=False)


def tmean(a, axis=None):
    return _sum_impl(a, axis, mean=True)


def reshape(a, shape):
    a = _ensure(a)
    old = a.data.shape

    def bw(g):
        return (g.reshape(old),)

    return _make(a.data.reshape(shape), (a,), bw)


def concat_cols(a, b):
    """Concatenate two matrices along axis 1."""
    a, b = _ensure(a), _ensure(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise DimensionError(f"concat_cols needs (m,p),(m,q); got {a.shape}, {b.shape}")
    na = a.shape[1]

    def bw(g):
        return (g[:, :na], g[:, na:])

    return _make(np.concatenate([a.data, b.data], axis=1), (a, b), bw)


def slice1d(a, start, stop):
    a = _ensure(a)
    if a.ndim != 1:
        raise DimensionError("slice1d expects a vector")
    n = a.shape[0]

    def bw(g):
        full = np.zeros(n)
        full[start:stop] = g
        return (full,)

    return _make(a.data[start:stop].copy(), (a,), bw)


def segment_sums(a, lengths):
    """Sum a vector in consecutive runs: out[i] = sum of the i-th run."""
    a = _ensure(a)
    if a.ndim != 1:
        raise DimensionError("segment_sums expects a vector")
    lengths = np.asarray(lengths, dtype=np.intp)
    if lengths.sum() != a.shape[0]:
        raise DimensionError(
            f"segment lengths sum to {lengths.sum()}, vector has {a.shape[0]} entries"
        )
    if np.any(lengths <= 0):
        raise ContractError("segment lengths must be positive")
    offsets = np.zeros(len(lengths), dtype=np.intp)
    np.cumsum(lengths[:-1], out=offsets[1:])
    out = np.add.reduceat(a.data, offsets)

    def bw(g):
        return (np.repeat(g, lengths),)

    return _make(out, (a,), bw)
