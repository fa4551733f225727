"""Reverse-mode automatic differentiation over numpy arrays.

A ``Tape`` records every differentiable operation performed while it is
active on the current thread.  ``Tape.backward`` replays the records in
exact reverse order, accumulating gradients keyed by tensor identity, so a
parameter that never reached the loss simply ends up with a zero gradient.

Tensors wrap a numpy array and are treated as immutable once created;
optimizers replace ``.data`` wholesale rather than mutating it in place.
"""

from __future__ import annotations

import threading

import numpy as np

_state = threading.local()


def _current_tape():
    return getattr(_state, "tape", None)


class Tape:
    """Recording of a forward pass, confined to one thread."""

    def __init__(self):
        self._records = []  # backward closures, forward order
        self._live = {}     # id -> Tensor, keeps ids stable while recording
        self._grads = {}    # id -> ndarray, filled by backward()

    def __enter__(self):
        if _current_tape() is not None:
            raise RuntimeError("a tape is already active on this thread")
        _state.tape = self
        return self

    def __exit__(self, *exc):
        _state.tape = None

    def record(self, backward_fn, tensors):
        self._records.append(backward_fn)
        for t in tensors:
            self._live[id(t)] = t

    def backward(self, loss: "Tensor") -> "Tape":
        if loss.data.size != 1:
            raise ValueError("backward requires a scalar loss, got shape %r"
                             % (loss.data.shape,))
        self._grads = {id(loss): np.ones_like(loss.data)}
        for fn in reversed(self._records):
            fn(self._grads)
        return self

    def grad(self, t: "Tensor") -> np.ndarray:
        g = self._grads.get(id(t))
        if g is None:
            return np.zeros_like(t.data)
        return np.asarray(g).reshape(t.data.shape)

    def gradients(self, loss: "Tensor", params: dict) -> dict:
        """Run backward and return {name: gradient} for the given parameters."""
        self.backward(loss)
        return {name: self.grad(p) for name, p in params.items()}


def _acc(grads, t, value):
    i = id(t)
    if i in grads:
        grads[i] = grads[i] + value
    else:
        grads[i] = value


def _out_grad(grads, t):
    return grads.get(id(t))


class Tensor:
    __slots__ = ("data",)

    def __init__(self, data, dtype=np.float64):
        self.data = np.asarray(data, dtype=dtype)

    @classmethod
    def _wrap(cls, arr):
        t = cls.__new__(cls)
        t.data = arr
        return t

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def __repr__(self):
        return "Tensor(%r)" % (self.data,)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(_as_tensor(other), -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _unbroadcast(g, shape):
    """Sum gradient g down to the given broadcast-source shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _binary(a, b, out_data, da_fn, db_fn):
    out = Tensor._wrap(out_data)
    tape = _current_tape()
    if tape is not None:
        def backward(grads, a=a, b=b, out=out):
            g = _out_grad(grads, out)
            if g is None:
                return
            _acc(grads, a, _unbroadcast(da_fn(g), a.data.shape))
            _acc(grads, b, _unbroadcast(db_fn(g), b.data.shape))
        tape.record(backward, (a, b, out))
    return out


def _unary(x, out_data, dx_fn):
    out = Tensor._wrap(out_data)
    tape = _current_tape()
    if tape is not None:
        def backward(grads, x=x, out=out):
            g = _out_grad(grads, out)
            if g is None:
                return
            _acc(grads, x, dx_fn(g))
        tape.record(backward, (x, out))
    return out


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    return _binary(a, b, a.data + b.data, lambda g: g, lambda g: g)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    return _binary(a, b, a.data * b.data,
                   lambda g: g * b.data, lambda g: g * a.data)


def constmul(x, arr):
    """Multiply by a constant array (no gradient flows into the constant)."""
    arr = np.asarray(arr, dtype=x.data.dtype)
    return _unary(x, x.data * arr, lambda g: g * arr)


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data
    out_data = ad @ bd
    if ad.ndim == 2 and bd.ndim == 1:
        return _binary(a, b, out_data,
                       lambda g: np.outer(g, bd), lambda g: ad.T @ g)
    if ad.ndim == 1 and bd.ndim == 2:
        return _binary(a, b, out_data,
                       lambda g: bd @ g, lambda g: np.outer(ad, g))
    if ad.ndim == 2 and bd.ndim == 2:
        return _binary(a, b, out_data,
                       lambda g: g @ bd.T, lambda g: ad.T @ g)
    raise ValueError("unsupported matmul ranks: %d and %d" % (ad.ndim, bd.ndim))


def tanh(x):
    y = np.tanh(x.data)
    return _unary(x, y, lambda g: g * (1.0 - y * y))


def sigmoid(x):
    y = 1.0 / (1.0 + np.exp(-x.data))
    return _unary(x, y, lambda g: g * y * (1.0 - y))


def exp(x):
    y = np.exp(x.data)
    return _unary(x, y, lambda g: g * y)


def log(x):
    return _unary(x, np.log(x.data), lambda g: g / x.data)


def softmax(x):
    """Numerically stable softmax of a vector (max-subtraction)."""
    if x.data.size == 0:
        raise ValueError("softmax of empty input")
    z = x.data - np.max(x.data)
    e = np.exp(z)
    y = e / e.sum()
    return _unary(x, y, lambda g: y * (g - np.dot(g, y)))


def log_softmax(x):
    if x.data.size == 0:
        raise ValueError("log_softmax of empty input")
    z = x.data - np.max(x.data)
    lse = np.log(np.sum(np.exp(z)))
    y = z - lse
    p = np.exp(y)
    return _unary(x, y, lambda g: g - p * g.sum())


def tsum(x):
    return _unary(x, np.asarray(x.data.sum()),
                  lambda g: np.broadcast_to(g, x.data.shape).copy())


def tmean(x):
    n = x.data.size
    return _unary(x, np.asarray(x.data.mean()),
                  lambda g: np.broadcast_to(g / n, x.data.shape).copy())


def concat(parts):
    parts = [_as_tensor(p) for p in parts]
    out = Tensor._wrap(np.concatenate([np.ravel(p.data) for p in parts]))
    tape = _current_tape()
    if tape is not None:
        sizes = [p.data.size for p in parts]
        def backward(grads, parts=parts, out=out, sizes=sizes):
            g = _out_grad(grads, out)
            if g is None:
                return
            off = 0
            for p, n in zip(parts, sizes):
                _acc(grads, p, g[off:off + n].reshape(p.data.shape))
                off += n
        tape.record(backward, list(parts) + [out])
    return out


def stack_rows(rows):
    """Stack 1-D tensors into a matrix, one per row."""
    rows = list(rows)
    out = Tensor._wrap(np.stack([r.data for r in rows]))
    tape = _current_tape()
    if tape is not None:
        def backward(grads, rows=rows, out=out):
            g = _out_grad(grads, out)
            if g is None:
                return
            for i, r in enumerate(rows):
                _acc(grads, r, g[i])
        tape.record(backward, rows + [out])
    return out


def element(x, idx):
    """Scalar element of a 1-D tensor."""
    idx = int(idx)
    out = Tensor._wrap(np.asarray(x.data[idx]))
    tape = _current_tape()
    if tape is not None:
        def backward(grads, x=x, out=out, idx=idx):
            g = _out_grad(grads, out)
            if g is None:
                return
            d = np.zeros_like(x.data)
            d[idx] = g
            _acc(grads, x, d)
        tape.record(backward, (x, out))
    return out


def row(m, idx):
    """Row of a 2-D tensor (embedding lookup)."""
    idx = int(idx)
    if not 0 <= idx < m.data.shape[0]:
        raise ValueError("row index %d out of range for %d rows"
                         % (idx, m.data.shape[0]))
    out = Tensor._wrap(m.data[idx].copy())
    tape = _current_tape()
    if tape is not None:
        def backward(grads, m=m, out=out, idx=idx):
            g = _out_grad(grads, out)
            if g is None:
                return
            d = np.zeros_like(m.data)
            d[idx] = g
            _acc(grads, m, d)
        tape.record(backward, (m, out))
    return out
