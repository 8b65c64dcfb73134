# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels.

Same API as ``_pykernels``.  ``matmul_stable`` uses a fixed (i, k, j) loop
order so each output row is computed with a deterministic accumulation
order that does not depend on batch size or row position; elementwise and
Adam kernels are fused single-pass loops.
"""

import numpy as np

from libc.math cimport exp as c_exp, fabs, log1p, sqrt as c_sqrt, tanh as c_tanh

NAME = "compiled"


def matmul(a, b):
    # Large-matrix product: BLAS via NumPy is already optimal here.
    return a @ b


def matmul_stable(a, b):
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t m = av.shape[0], k = av.shape[1], n = bv.shape[1]
    if bv.shape[0] != k:
        raise ValueError("inner dimensions disagree")
    out = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] cv = out
    cdef Py_ssize_t i, j, kk
    cdef double aik
    for i in range(m):
        for kk in range(k):
            aik = av[i, kk]
            for j in range(n):
                cv[i, j] += aik * bv[kk, j]
    return out


def bias_add(x, b):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t m = xv.shape[0], n = xv.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            ov[i, j] = xv[i, j] + bv[j]
    return out


def bias_grad(g):
    cdef double[:, ::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t m = gv.shape[0], n = gv.shape[1]
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j
    for i in range(m):
        for j in range(n):
            ov[j] += gv[i, j]
    return out


cdef inline double _logistic1(double x) nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + c_exp(-x))
    e = c_exp(x)
    return e / (1.0 + e)


# Largest double strictly below 1: keeps tanh inside the open interval.
cdef double _TANH_LIM = 0.9999999999999999


cdef inline double _tanh1(double x) nogil:
    cdef double y = c_tanh(x)
    if y > _TANH_LIM:
        return _TANH_LIM
    if y < -_TANH_LIM:
        return -_TANH_LIM
    return y


def leaky_relu(x, double slope):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    shape = arr.shape
    flat = arr.ravel()
    cdef double[::1] xv = flat
    out = np.empty_like(flat)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = xv[i] if xv[i] > 0.0 else slope * xv[i]
    return out.reshape(shape)


def leaky_relu_grad(x, g, double slope):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    shape = arr.shape
    xf = arr.ravel()
    gf = np.ascontiguousarray(g, dtype=np.float64).ravel()
    cdef double[::1] xv = xf
    cdef double[::1] gv = gf
    out = np.empty_like(xf)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = gv[i] if xv[i] > 0.0 else slope * gv[i]
    return out.reshape(shape)


def tanh(x):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    shape = arr.shape
    flat = arr.ravel()
    cdef double[::1] xv = flat
    out = np.empty_like(flat)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = _tanh1(xv[i])
    return out.reshape(shape)


def tanh_grad(out, g):
    arr = np.ascontiguousarray(out, dtype=np.float64)
    shape = arr.shape
    of = arr.ravel()
    gf = np.ascontiguousarray(g, dtype=np.float64).ravel()
    cdef double[::1] ov = of
    cdef double[::1] gv = gf
    res = np.empty_like(of)
    cdef double[::1] rv = res
    cdef Py_ssize_t i, n = ov.shape[0]
    for i in range(n):
        rv[i] = gv[i] * (1.0 - ov[i] * ov[i])
    return res.reshape(shape)


def logistic(x):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    shape = arr.shape
    flat = arr.ravel()
    cdef double[::1] xv = flat
    out = np.empty_like(flat)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = _logistic1(xv[i])
    return out.reshape(shape)


def logistic_grad(out, g):
    arr = np.ascontiguousarray(out, dtype=np.float64)
    shape = arr.shape
    of = arr.ravel()
    gf = np.ascontiguousarray(g, dtype=np.float64).ravel()
    cdef double[::1] ov = of
    cdef double[::1] gv = gf
    res = np.empty_like(of)
    cdef double[::1] rv = res
    cdef Py_ssize_t i, n = ov.shape[0]
    for i in range(n):
        rv[i] = gv[i] * ov[i] * (1.0 - ov[i])
    return res.reshape(shape)


def softplus(x):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    shape = arr.shape
    flat = arr.ravel()
    cdef double[::1] xv = flat
    out = np.empty_like(flat)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef double xi
    for i in range(n):
        xi = xv[i]
        ov[i] = (xi if xi > 0.0 else 0.0) + log1p(c_exp(-fabs(xi)))
    return out.reshape(shape)


def softplus_grad(x, g):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    shape = arr.shape
    xf = arr.ravel()
    gf = np.ascontiguousarray(g, dtype=np.float64).ravel()
    cdef double[::1] xv = xf
    cdef double[::1] gv = gf
    res = np.empty_like(xf)
    cdef double[::1] rv = res
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        rv[i] = gv[i] * _logistic1(xv[i])
    return res.reshape(shape)


def adam_step(p, g, m, v, long t, double lr, double beta1, double beta2, double eps):
    if not (p.flags.c_contiguous and m.flags.c_contiguous and v.flags.c_contiguous):
        raise ValueError("adam_step requires contiguous parameter/moment arrays")
    cdef double[::1] pv = p.ravel()
    cdef double[::1] gv = np.ascontiguousarray(g, dtype=np.float64).ravel()
    cdef double[::1] mv = m.ravel()
    cdef double[::1] vv = v.ravel()
    cdef Py_ssize_t i, n = pv.shape[0]
    cdef double c1 = 1.0 - beta1 ** t
    cdef double c2 = 1.0 - beta2 ** t
    cdef double mhat, vhat
    for i in range(n):
        mv[i] = beta1 * mv[i] + (1.0 - beta1) * gv[i]
        vv[i] = beta2 * vv[i] + (1.0 - beta2) * gv[i] * gv[i]
        mhat = mv[i] / c1
        vhat = vv[i] / c2
        pv[i] -= lr * mhat / (c_sqrt(vhat) + eps)


def pairwise_sq_dists(x):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], d = xv.shape[1]
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(d):
                diff = xv[i, k] - xv[j, k]
                acc += diff * diff
            ov[i, j] = acc
    return out
