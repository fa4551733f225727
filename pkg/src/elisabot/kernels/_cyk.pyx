# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled fused recurrent-cell kernels (same API as ``_npk``)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sig(double x) nogil:
    return 1.0 / (1.0 + exp(-x))


cdef void _affine(double[:, ::1] w, double[::1] x,
                  double[:, ::1] u, double[::1] h,
                  double[::1] b, double[::1] out) nogil:
    # out = w @ x + u @ h + b
    cdef Py_ssize_t m = w.shape[0], n = w.shape[1], k = u.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(m):
        acc = b[i]
        for j in range(n):
            acc += w[i, j] * x[j]
        for j in range(k):
            acc += u[i, j] * h[j]
        out[i] = acc


cdef void _matvec_t_acc(double[:, ::1] w, double[::1] v, double[::1] out) nogil:
    # out += w.T @ v
    cdef Py_ssize_t m = w.shape[0], n = w.shape[1]
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            out[j] += w[i, j] * v[i]


cdef void _outer(double[::1] a, double[::1] b, double[:, ::1] out) nogil:
    cdef Py_ssize_t m = a.shape[0], n = b.shape[0]
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            out[i, j] = a[i] * b[j]


def _c(arr):
    return np.ascontiguousarray(arr, dtype=np.float64)


def lstm_forward(x, h, c,
                 w_i, u_i, b_i, w_f, u_f, b_f,
                 w_o, u_o, b_o, w_g, u_g, b_g):
    x = _c(x); h = _c(h); c = _c(c)
    cdef Py_ssize_t dh = h.shape[0]
    i_a = np.empty(dh); f_a = np.empty(dh)
    o_a = np.empty(dh); g_a = np.empty(dh)
    c2 = np.empty(dh); t_a = np.empty(dh); h2 = np.empty(dh)
    cdef double[::1] iv = i_a, fv = f_a, ov = o_a, gv = g_a
    cdef double[::1] c2v = c2, tv = t_a, h2v = h2, cv = c
    cdef Py_ssize_t k
    _affine(_c(w_i), x, _c(u_i), h, _c(b_i), iv)
    _affine(_c(w_f), x, _c(u_f), h, _c(b_f), fv)
    _affine(_c(w_o), x, _c(u_o), h, _c(b_o), ov)
    _affine(_c(w_g), x, _c(u_g), h, _c(b_g), gv)
    for k in range(dh):
        iv[k] = _sig(iv[k])
        fv[k] = _sig(fv[k])
        ov[k] = _sig(ov[k])
        gv[k] = tanh(gv[k])
        c2v[k] = fv[k] * cv[k] + iv[k] * gv[k]
        tv[k] = tanh(c2v[k])
        h2v[k] = ov[k] * tv[k]
    return h2, c2, (i_a, f_a, o_a, g_a, t_a)


def lstm_backward(dh2, dc2, x, h, c,
                  w_i, u_i, b_i, w_f, u_f, b_f,
                  w_o, u_o, b_o, w_g, u_g, b_g, cache):
    i_a, f_a, o_a, g_a, t_a = cache
    x = _c(x); h = _c(h); c = _c(c)
    dh2 = _c(dh2); dc2 = _c(dc2)
    cdef Py_ssize_t dh_n = h.shape[0], dx_n = x.shape[0]
    dpi = np.empty(dh_n); dpf = np.empty(dh_n)
    dpo = np.empty(dh_n); dpg = np.empty(dh_n)
    dc = np.empty(dh_n)
    cdef double[::1] iv = _c(i_a), fv = _c(f_a), ov = _c(o_a)
    cdef double[::1] gv = _c(g_a), tv = _c(t_a)
    cdef double[::1] dh2v = dh2, dc2v = dc2, cv = c
    cdef double[::1] dpiv = dpi, dpfv = dpf, dpov = dpo, dpgv = dpg, dcv = dc
    cdef double dct, do_
    cdef Py_ssize_t k
    for k in range(dh_n):
        do_ = dh2v[k] * tv[k]
        dct = dc2v[k] + dh2v[k] * ov[k] * (1.0 - tv[k] * tv[k])
        dcv[k] = dct * fv[k]
        dpiv[k] = dct * gv[k] * iv[k] * (1.0 - iv[k])
        dpfv[k] = dct * cv[k] * fv[k] * (1.0 - fv[k])
        dpov[k] = do_ * ov[k] * (1.0 - ov[k])
        dpgv[k] = dct * iv[k] * (1.0 - gv[k] * gv[k])
    dx = np.zeros(dx_n)
    dh_out = np.zeros(dh_n)
    w_i = _c(w_i); u_i = _c(u_i); w_f = _c(w_f); u_f = _c(u_f)
    w_o = _c(w_o); u_o = _c(u_o); w_g = _c(w_g); u_g = _c(u_g)
    _matvec_t_acc(w_i, dpi, dx); _matvec_t_acc(u_i, dpi, dh_out)
    _matvec_t_acc(w_f, dpf, dx); _matvec_t_acc(u_f, dpf, dh_out)
    _matvec_t_acc(w_o, dpo, dx); _matvec_t_acc(u_o, dpo, dh_out)
    _matvec_t_acc(w_g, dpg, dx); _matvec_t_acc(u_g, dpg, dh_out)
    dwi = np.empty((dh_n, dx_n)); dui = np.empty((dh_n, dh_n))
    dwf = np.empty((dh_n, dx_n)); duf = np.empty((dh_n, dh_n))
    dwo = np.empty((dh_n, dx_n)); duo = np.empty((dh_n, dh_n))
    dwg = np.empty((dh_n, dx_n)); dug = np.empty((dh_n, dh_n))
    _outer(dpi, x, dwi); _outer(dpi, h, dui)
    _outer(dpf, x, dwf); _outer(dpf, h, duf)
    _outer(dpo, x, dwo); _outer(dpo, h, duo)
    _outer(dpg, x, dwg); _outer(dpg, h, dug)
    return dx, dh_out, dc, (dwi, dui, dpi, dwf, duf, dpf,
                            dwo, duo, dpo, dwg, dug, dpg)


def gru_forward(x, h, w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h):
    x = _c(x); h = _c(h)
    cdef Py_ssize_t dh = h.shape[0]
    z_a = np.empty(dh); r_a = np.empty(dh)
    rh = np.empty(dh); hc = np.empty(dh); h2 = np.empty(dh)
    cdef double[::1] zv = z_a, rv = r_a, rhv = rh, hcv = hc
    cdef double[::1] h2v = h2, hv = h
    cdef Py_ssize_t k
    _affine(_c(w_z), x, _c(u_z), h, _c(b_z), zv)
    _affine(_c(w_r), x, _c(u_r), h, _c(b_r), rv)
    for k in range(dh):
        zv[k] = _sig(zv[k])
        rv[k] = _sig(rv[k])
        rhv[k] = rv[k] * hv[k]
    _affine(_c(w_h), x, _c(u_h), rh, _c(b_h), hcv)
    for k in range(dh):
        hcv[k] = tanh(hcv[k])
        h2v[k] = (1.0 - zv[k]) * hv[k] + zv[k] * hcv[k]
    return h2, (z_a, r_a, rh, hc)


def gru_backward(dh2, x, h,
                 w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h, cache):
    z_a, r_a, rh_a, hc_a = cache
    x = _c(x); h = _c(h); dh2 = _c(dh2)
    cdef Py_ssize_t dh_n = h.shape[0], dx_n = x.shape[0]
    dph = np.empty(dh_n)
    drh = np.zeros(dh_n)
    dpz = np.empty(dh_n); dpr = np.empty(dh_n)
    dh_out = np.empty(dh_n)
    cdef double[::1] zv = _c(z_a), rv = _c(r_a), hcv = _c(hc_a)
    cdef double[::1] dh2v = dh2, hv = h
    cdef double[::1] dphv = dph, drhv = drh, dpzv = dpz, dprv = dpr
    cdef double[::1] dhv = dh_out
    cdef double dz, dr
    cdef Py_ssize_t k
    u_h = _c(u_h)
    for k in range(dh_n):
        dphv[k] = dh2v[k] * zv[k] * (1.0 - hcv[k] * hcv[k])
        dhv[k] = dh2v[k] * (1.0 - zv[k])
    _matvec_t_acc(u_h, dph, drh)
    for k in range(dh_n):
        dr = drhv[k] * hv[k]
        dz = dh2v[k] * (hcv[k] - hv[k])
        dhv[k] += drhv[k] * rv[k]
        dpzv[k] = dz * zv[k] * (1.0 - zv[k])
        dprv[k] = dr * rv[k] * (1.0 - rv[k])
    dx = np.zeros(dx_n)
    w_z = _c(w_z); u_z = _c(u_z); w_r = _c(w_r); u_r = _c(u_r); w_h = _c(w_h)
    _matvec_t_acc(u_z, dpz, dh_out)
    _matvec_t_acc(u_r, dpr, dh_out)
    _matvec_t_acc(w_z, dpz, dx)
    _matvec_t_acc(w_r, dpr, dx)
    _matvec_t_acc(w_h, dph, dx)
    dwz = np.empty((dh_n, dx_n)); duz = np.empty((dh_n, dh_n))
    dwr = np.empty((dh_n, dx_n)); dur = np.empty((dh_n, dh_n))
    dwh = np.empty((dh_n, dx_n)); duh = np.empty((dh_n, dh_n))
    _outer(dpz, x, dwz); _outer(dpz, h, duz)
    _outer(dpr, x, dwr); _outer(dpr, h, dur)
    _outer(dph, x, dwh); _outer(dph, _c(rh_a), duh)
    return dx, dh_out, (dwz, duz, dpz, dwr, dur, dpr, dwh, duh, dph)
