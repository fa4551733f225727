"""Pure-numpy implementations of the fused recurrent-cell kernels.

Each cell step is one fused forward/backward pair: the forward returns the
new state plus a cache of gate activations, the backward consumes the cache
and upstream gradients and returns gradients for the inputs and every
weight.  The Cython module ``_cyk`` implements the same signatures.
"""

import numpy as np


def _sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_forward(x, h, c,
                 w_i, u_i, b_i, w_f, u_f, b_f,
                 w_o, u_o, b_o, w_g, u_g, b_g):
    i = _sig(w_i @ x + u_i @ h + b_i)
    f = _sig(w_f @ x + u_f @ h + b_f)
    o = _sig(w_o @ x + u_o @ h + b_o)
    g = np.tanh(w_g @ x + u_g @ h + b_g)
    c2 = f * c + i * g
    t = np.tanh(c2)
    h2 = o * t
    return h2, c2, (i, f, o, g, t)


def lstm_backward(dh2, dc2, x, h, c,
                  w_i, u_i, b_i, w_f, u_f, b_f,
                  w_o, u_o, b_o, w_g, u_g, b_g, cache):
    i, f, o, g, t = cache
    do = dh2 * t
    dct = dc2 + dh2 * o * (1.0 - t * t)
    di = dct * g
    df = dct * c
    dg = dct * i
    dc = dct * f
    dpi = di * i * (1.0 - i)
    dpf = df * f * (1.0 - f)
    dpo = do * o * (1.0 - o)
    dpg = dg * (1.0 - g * g)
    dx = w_i.T @ dpi + w_f.T @ dpf + w_o.T @ dpo + w_g.T @ dpg
    dh = u_i.T @ dpi + u_f.T @ dpf + u_o.T @ dpo + u_g.T @ dpg
    dparams = (np.outer(dpi, x), np.outer(dpi, h), dpi,
               np.outer(dpf, x), np.outer(dpf, h), dpf,
               np.outer(dpo, x), np.outer(dpo, h), dpo,
               np.outer(dpg, x), np.outer(dpg, h), dpg)
    return dx, dh, dc, dparams


def gru_forward(x, h, w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h):
    z = _sig(w_z @ x + u_z @ h + b_z)
    r = _sig(w_r @ x + u_r @ h + b_r)
    rh = r * h
    hc = np.tanh(w_h @ x + u_h @ rh + b_h)
    h2 = (1.0 - z) * h + z * hc
    return h2, (z, r, rh, hc)


def gru_backward(dh2, x, h,
                 w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h, cache):
    z, r, rh, hc = cache
    dhc = dh2 * z
    dz = dh2 * (hc - h)
    dh = dh2 * (1.0 - z)
    dph = dhc * (1.0 - hc * hc)
    drh = u_h.T @ dph
    dr = drh * h
    dh = dh + drh * r
    dpz = dz * z * (1.0 - z)
    dpr = dr * r * (1.0 - r)
    dh = dh + u_z.T @ dpz + u_r.T @ dpr
    dx = w_z.T @ dpz + w_r.T @ dpr + w_h.T @ dph
    dparams = (np.outer(dpz, x), np.outer(dpz, h), dpz,
               np.outer(dpr, x), np.outer(dpr, h), dpr,
               np.outer(dph, x), np.outer(dph, rh), dph)
    return dx, dh, dparams
