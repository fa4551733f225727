"""Recurrent cells, additive attention and dropout on top of the autodiff core.

The GRU/LSTM steps are single fused tape nodes backed by the kernel layer
(Cython or numpy); their hand-written backward passes are verified against
finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .autodiff import (Tensor, _acc, _current_tape, _out_grad, concat,
                       constmul, matmul, row, softmax, tanh)


def init_weight(rng: np.random.Generator, rows: int, cols: int | None = None):
    """Uniform init in [-k, k], k = 1/sqrt(fan_in), rounded through float32
    so freshly initialized models survive the float32 checkpoint format
    bit-exactly."""
    fan_in = cols if cols is not None else rows
    k = 1.0 / np.sqrt(fan_in)
    shape = (rows,) if cols is None else (rows, cols)
    w = rng.uniform(-k, k, size=shape)
    return Tensor(w.astype(np.float32).astype(np.float64))


@dataclass
class GruParams:
    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_h: Tensor
    u_h: Tensor
    b_h: Tensor
    input_dim: int
    hidden_dim: int

    @classmethod
    def init(cls, input_dim, hidden_dim, rng):
        def w():
            return init_weight(rng, hidden_dim, input_dim)

        def u():
            return init_weight(rng, hidden_dim, hidden_dim)

        def b():
            return Tensor(np.zeros(hidden_dim))

        return cls(w(), u(), b(), w(), u(), b(), w(), u(), b(),
                   input_dim, hidden_dim)

    def tensors(self, prefix=""):
        names = ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")
        return {prefix + n: getattr(self, n) for n in names}

    def _raw(self):
        return (self.w_z.data, self.u_z.data, self.b_z.data,
                self.w_r.data, self.u_r.data, self.b_r.data,
                self.w_h.data, self.u_h.data, self.b_h.data)


@dataclass
class LstmParams:
    w_i: Tensor
    u_i: Tensor
    b_i: Tensor
    w_f: Tensor
    u_f: Tensor
    b_f: Tensor
    w_o: Tensor
    u_o: Tensor
    b_o: Tensor
    w_g: Tensor
    u_g: Tensor
    b_g: Tensor
    input_dim: int
    hidden_dim: int

    @classmethod
    def init(cls, input_dim, hidden_dim, rng):
        def w():
            return init_weight(rng, hidden_dim, input_dim)

        def u():
            return init_weight(rng, hidden_dim, hidden_dim)

        def b():
            return Tensor(np.zeros(hidden_dim))

        return cls(w(), u(), b(), w(), u(), b(), w(), u(), b(), w(), u(), b(),
                   input_dim, hidden_dim)

    def tensors(self, prefix=""):
        names = ("w_i", "u_i", "b_i", "w_f", "u_f", "b_f",
                 "w_o", "u_o", "b_o", "w_g", "u_g", "b_g")
        return {prefix + n: getattr(self, n) for n in names}

    def _raw(self):
        return (self.w_i.data, self.u_i.data, self.b_i.data,
                self.w_f.data, self.u_f.data, self.b_f.data,
                self.w_o.data, self.u_o.data, self.b_o.data,
                self.w_g.data, self.u_g.data, self.b_g.data)


@dataclass
class AttentionParams:
    """Additive (Bahdanau-style) attention: score_i = v . tanh(Wq q + Wa a_i).

    w_query is stored (query_dim, attention_dim) and w_ann
    (annotation_dim, attention_dim) so annotation projection is a single
    matrix product.
    """

    w_query: Tensor
    w_ann: Tensor
    v: Tensor
    attention_dim: int

    @classmethod
    def init(cls, query_dim, annotation_dim, attention_dim, rng):
        return cls(
            init_weight(rng, query_dim, attention_dim),
            init_weight(rng, annotation_dim, attention_dim),
            init_weight(rng, attention_dim),
            attention_dim,
        )

    def tensors(self, prefix=""):
        return {prefix + "w_query": self.w_query,
                prefix + "w_ann": self.w_ann,
                prefix + "v": self.v}


def _check_vec(name, t, dim):
    if t.data.ndim != 1 or t.data.shape[0] != dim:
        raise ValueError("%s must be a vector of length %d, got shape %r"
                         % (name, dim, t.data.shape))


def gru_step(x: Tensor, h: Tensor, p: GruParams) -> Tensor:
    """One GRU update: h' = (1-z)*h + z*h~."""
    _check_vec("x", x, p.input_dim)
    _check_vec("h", h, p.hidden_dim)
    raw = p._raw()
    h2_data, cache = K.gru_forward(x.data, h.data, *raw)
    h2 = Tensor._wrap(h2_data)
    tape = _current_tape()
    if tape is not None:
        ptensors = (p.w_z, p.u_z, p.b_z, p.w_r, p.u_r, p.b_r,
                    p.w_h, p.u_h, p.b_h)

        def backward(grads, x=x, h=h, h2=h2, raw=raw, cache=cache,
                     ptensors=ptensors):
            g = _out_grad(grads, h2)
            if g is None:
                return
            dx, dh, dparams = K.gru_backward(
                np.asarray(g), x.data, h.data, *raw, cache)
            _acc(grads, x, dx)
            _acc(grads, h, dh)
            for t, d in zip(ptensors, dparams):
                _acc(grads, t, d)

        tape.record(backward, (x, h, h2) + ptensors)
    return h2


def lstm_step(x: Tensor, h: Tensor, c: Tensor, p: LstmParams):
    """One LSTM update, returning (h', c')."""
    _check_vec("x", x, p.input_dim)
    _check_vec("h", h, p.hidden_dim)
    _check_vec("c", c, p.hidden_dim)
    raw = p._raw()
    h2_data, c2_data, cache = K.lstm_forward(x.data, h.data, c.data, *raw)
    h2 = Tensor._wrap(h2_data)
    c2 = Tensor._wrap(c2_data)
    tape = _current_tape()
    if tape is not None:
        ptensors = (p.w_i, p.u_i, p.b_i, p.w_f, p.u_f, p.b_f,
                    p.w_o, p.u_o, p.b_o, p.w_g, p.u_g, p.b_g)

        def backward(grads, x=x, h=h, c=c, h2=h2, c2=c2, raw=raw,
                     cache=cache, ptensors=ptensors):
            gh = _out_grad(grads, h2)
            gc = _out_grad(grads, c2)
            if gh is None and gc is None:
                return
            if gh is None:
                gh = np.zeros_like(h2.data)
            if gc is None:
                gc = np.zeros_like(c2.data)
            dx, dh, dc, dparams = K.lstm_backward(
                np.asarray(gh), np.asarray(gc), x.data, h.data, c.data,
                *raw, cache)
            _acc(grads, x, dx)
            _acc(grads, h, dh)
            _acc(grads, c, dc)
            for t, d in zip(ptensors, dparams):
                _acc(grads, t, d)

        tape.record(backward, (x, h, c, h2, c2) + ptensors)
    return h2, c2


def additive_attention(query: Tensor, annotations: Tensor, p: AttentionParams):
    """Attention over annotation rows.

    Returns (weights, context): weights is a probability vector over the N
    rows, context the weight-averaged annotation vector.
    """
    a = annotations.data
    if a.ndim != 2 or a.shape[0] < 1:
        raise ValueError("annotations must be a non-empty N x D matrix, "
                         "got shape %r" % (a.shape,))
    q_proj = matmul(query, p.w_query)          # (att,)
    a_proj = matmul(annotations, p.w_ann)      # (N, att)
    scores = matmul(tanh(a_proj + q_proj), p.v)  # (N,)
    weights = softmax(scores)
    context = matmul(weights, annotations)     # (D,)
    return weights, context


def dropout(x: Tensor, rate: float, training: bool,
            rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: scaling happens at train time, eval is identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1), got %r" % (rate,))
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs a seeded generator")
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    return constmul(x, mask)


def affine(w: Tensor, x: Tensor, b: Tensor) -> Tensor:
    return matmul(w, x) + b


def concat_vecs(*parts) -> Tensor:
    return concat(parts)
