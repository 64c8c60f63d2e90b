"""Small reverse-mode differentiation engine over 2-d float64 arrays.

Everything is a matrix of shape ``(rows, cols)``; scalars are ``(1, 1)``.
Operations executed inside an active :class:`Tape` are recorded together with
a closure computing the vector-Jacobian product, and :meth:`Tape.gradient`
replays the record in exact reverse order.  Outside a tape the same
functions are plain forward evaluations, which keeps sampling and evaluation
cheap.

Broadcasting is limited to adding a ``(1, cols)`` row vector (bias) and to
python scalars.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import NumericalError, ShapeError

__all__ = [
    "Tensor",
    "Tape",
    "param",
    "const",
    "matmul",
    "add",
    "sub",
    "mul",
    "neg",
    "relu",
    "leaky_relu",
    "sigmoid",
    "softplus",
    "tanh",
    "log",
    "square",
    "abs_",
    "max_with",
    "sum_",
    "mean",
    "concat",
    "rows",
    "backward",
    "grad_check",
    "GradCheckResult",
    "Adam",
    "SGDMomentum",
]

_TAPES: list["Tape"] = []
_KINK_RECORDERS: list[list] = []


class Tensor:
    """A 2-d float64 array that may take part in differentiation."""

    __slots__ = ("data", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"Tensor must be at most 2-d, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        if self.data.shape != (1, 1):
            raise ShapeError(f"item() needs a (1, 1) tensor, got {self.data.shape}")
        return float(self.data[0, 0])

    def numpy(self):
        return self.data

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)


def param(data, name=None):
    """Leaf tensor that gradients are taken with respect to."""
    return Tensor(np.array(data, dtype=np.float64, copy=True), requires_grad=True, name=name)


def const(data):
    return data if isinstance(data, Tensor) else Tensor(data)


class Tape:
    """Ordered record of primitive operations.

    Use as a context manager::

        with Tape() as tape:
            loss = mean(square(x @ w))
        (gw,) = tape.gradient(loss, [w])
    """

    def __init__(self):
        self._ops = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def __len__(self):
        return len(self._ops)

    def _record(self, out, parents, vjp):
        self._ops.append((out, parents, vjp))

    def gradient(self, loss, params=None):
        """Reverse pass from a scalar ``loss``.

        Returns a list of gradient arrays aligned with ``params`` (zeros for
        parameters the loss does not depend on).  With ``params=None`` a dict
        mapping every reached leaf tensor to its gradient is returned.
        """
        if loss.shape != (1, 1):
            raise ShapeError(f"loss must be a (1, 1) tensor, got {loss.shape}")
        grads = {id(loss): np.ones((1, 1))}
        leaves = {}
        for out, parents, vjp in reversed(self._ops):
            g = grads.pop(id(out), None)
            if g is None:
                continue
            for parent, pg in zip(parents, vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
                    leaves[key] = parent
        if params is None:
            out = {}
            for key, t in leaves.items():
                if key in grads:
                    out[t] = grads[key]
            if loss.requires_grad and not self._ops:
                out[loss] = np.ones((1, 1))
            return out
        result = []
        for p in params:
            if p is loss:
                result.append(np.ones((1, 1)))
            else:
                result.append(grads.get(id(p), np.zeros_like(p.data)))
        return result


def backward(tape, loss, params=None):
    """Functional alias for :meth:`Tape.gradient`."""
    return tape.gradient(loss, params)


def _finite(arr, op):
    if not np.isfinite(arr).all():
        raise NumericalError(f"non-finite output in {op}")
    return arr


def _emit(data, parents, vjp, op):
    _finite(data, op)
    out = Tensor(data)
    if _TAPES and any(p.requires_grad for p in parents):
        out.requires_grad = True
        _TAPES[-1]._record(out, parents, vjp)
    return out


def _kink(mask):
    if _KINK_RECORDERS:
        _KINK_RECORDERS[-1].append(mask)


def _as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.full((1, 1), float(x)))


def matmul(a, b):
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _emit(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def add(a, b):
    if not isinstance(b, Tensor):
        c = float(b)
        return _emit(a.data + c, (a,), lambda g: (g,), "add")
    if a.shape == b.shape:
        return _emit(a.data + b.data, (a, b), lambda g: (g, g), "add")
    if b.shape == (1, a.shape[1]):
        return _emit(a.data + b.data, (a, b), lambda g: (g, g.sum(axis=0, keepdims=True)), "add")
    if a.shape == (1, b.shape[1]):
        return add(b, a)
    raise ShapeError(f"add shape mismatch {a.shape} + {b.shape}")


def sub(a, b):
    if not isinstance(b, Tensor):
        return add(a, -float(b))
    if a.shape != b.shape:
        raise ShapeError(f"sub shape mismatch {a.shape} - {b.shape}")
    return _emit(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a, b):
    if not isinstance(b, Tensor):
        c = float(b)
        return _emit(a.data * c, (a,), lambda g: (g * c,), "mul")
    if a.shape != b.shape:
        raise ShapeError(f"mul shape mismatch {a.shape} * {b.shape}")
    ad, bd = a.data, b.data
    return _emit(ad * bd, (a, b), lambda g: (g * bd, g * ad), "mul")


def neg(a):
    return _emit(-a.data, (a,), lambda g: (-g,), "neg")


def relu(a):
    mask = a.data > 0
    _kink(mask)
    return _emit(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def leaky_relu(a, alpha=0.2):
    mask = a.data > 0
    _kink(mask)
    slope = np.where(mask, 1.0, alpha)
    return _emit(a.data * slope, (a,), lambda g: (g * slope,), "leaky_relu")


def sigmoid(a):
    s = expit(a.data)
    return _emit(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def softplus(a):
    x = a.data
    return _emit(np.logaddexp(0.0, x), (a,), lambda g: (g * expit(x),), "softplus")


def tanh(a):
    t = np.tanh(a.data)
    return _emit(t, (a,), lambda g: (g * (1.0 - t * t),), "tanh")


def log(a):
    x = a.data
    if (x <= 0).any():
        raise NumericalError("log of non-positive value")
    return _emit(np.log(x), (a,), lambda g: (g / x,), "log")


def square(a):
    x = a.data
    return _emit(x * x, (a,), lambda g: (2.0 * g * x,), "square")


def abs_(a):
    x = a.data
    _kink(x > 0)
    # subgradient 0 at the kink
    return _emit(np.abs(x), (a,), lambda g: (g * np.sign(x),), "abs")


def max_with(a, c=0.0):
    """Elementwise ``max(a, c)`` for a constant ``c`` (subgradient 0 at ``a == c``)."""
    mask = a.data > c
    _kink(mask)
    return _emit(np.where(mask, a.data, c), (a,), lambda g: (g * mask,), "max_with")


def sum_(a, axis=None):
    shape = a.shape
    if axis is None:
        return _emit(a.data.sum().reshape(1, 1), (a,), lambda g: (np.broadcast_to(g, shape).copy(),), "sum")
    if axis not in (0, 1):
        raise ShapeError(f"axis must be None, 0 or 1, got {axis}")
    return _emit(
        a.data.sum(axis=axis, keepdims=True), (a,), lambda g: (np.broadcast_to(g, shape).copy(),), "sum"
    )


def mean(a, axis=None):
    n = a.data.size if axis is None else a.shape[axis]
    return mul(sum_(a, axis), 1.0 / n)


def concat(tensors, axis=1):
    if axis not in (0, 1):
        raise ShapeError(f"axis must be 0 or 1, got {axis}")
    other = 1 - axis
    if len({t.shape[other] for t in tensors}) != 1:
        raise ShapeError(f"concat shape mismatch along axis {other}: {[t.shape for t in tensors]}")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    return _emit(data, tuple(tensors), lambda g: tuple(np.split(g, splits, axis=axis)), "concat")


def rows(a, start, stop):
    """Row slice ``a[start:stop]``."""
    n, m = a.shape
    if not 0 <= start <= stop <= n:
        raise ShapeError(f"row slice [{start}:{stop}] out of bounds for {a.shape}")

    def vjp(g):
        full = np.zeros((n, m))
        full[start:stop] = g
        return (full,)

    return _emit(a.data[start:stop].copy(), (a,), vjp, "rows")


# ---------------------------------------------------------------- gradient check


@dataclass
class GradCheckResult:
    max_rel_error: float
    worst: tuple  # (param index, flat coordinate)
    n_checked: int
    n_excluded: int


def _eval_with_kinks(function):
    rec = []
    _KINK_RECORDERS.append(rec)
    try:
        value = function().item()
    finally:
        _KINK_RECORDERS.pop()
    return value, rec


def _same_pattern(a, b):
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(function, params, fd_step=1e-3, exclude_kinks=True, floor=1e-6):
    """Compare tape gradients of ``function()`` with central differences.

    ``function`` takes no arguments and returns a scalar Tensor computed from
    the current contents of ``params``.  Coordinates whose perturbation flips
    the branch of any ReLU/abs/hinge primitive are excluded when
    ``exclude_kinks`` is set.  The relative error of a coordinate is
    ``|a - n| / max(|a|, |n|, floor)``.
    """
    with Tape() as tape:
        loss = function()
    analytic = tape.gradient(loss, params)
    _, base_pattern = _eval_with_kinks(function)

    worst_err, worst = 0.0, (-1, -1)
    n_checked = n_excluded = 0
    for pi, (p, ga) in enumerate(zip(params, analytic)):
        flat = p.data.reshape(-1)
        gflat = ga.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + fd_step
            f_plus, pat_plus = _eval_with_kinks(function)
            flat[k] = orig - fd_step
            f_minus, pat_minus = _eval_with_kinks(function)
            flat[k] = orig
            if exclude_kinks and not (
                _same_pattern(pat_plus, base_pattern) and _same_pattern(pat_minus, base_pattern)
            ):
                n_excluded += 1
                continue
            numeric = (f_plus - f_minus) / (2.0 * fd_step)
            a = gflat[k]
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            n_checked += 1
            if err > worst_err:
                worst_err, worst = err, (pi, k)
    return GradCheckResult(worst_err, worst, n_checked, n_excluded)


# ---------------------------------------------------------------- optimizers


class SGDMomentum:
    """Heavy-ball gradient descent, updating parameter arrays in place."""

    def __init__(self, params, lr=1e-3, momentum=0.5):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads):
        for p, v, g in zip(self.params, self.velocity, grads):
            v *= self.momentum
            v -= self.lr * g
            p.data += v

    def state(self):
        return {f"v{i}": v for i, v in enumerate(self.velocity)}


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.5, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, m, v, g in zip(self.params, self.m, self.v, grads):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
