# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: row softmax, layer norm, GELU.

Semantics mirror dialemo.model._kernels_np exactly (float64, C-contiguous
2-D inputs); loops are fused to avoid numpy's intermediate temporaries.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, sqrt, tanh

cnp.import_array()

cdef double GELU_C = sqrt(2.0 / np.pi)
cdef double GELU_A = 0.044715


def softmax_rows(double[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0], k = x.shape[1]
    out_arr = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double m, s, e
    for i in range(n):
        m = -INFINITY
        for j in range(k):
            if x[i, j] > m:
                m = x[i, j]
        s = 0.0
        for j in range(k):
            e = exp(x[i, j] - m)
            out[i, j] = e
            s += e
        for j in range(k):
            out[i, j] /= s
    return out_arr


def layernorm_forward(double[:, ::1] x, double[::1] gamma, double[::1] beta,
                      double eps=1e-5):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    y_arr = np.empty((n, d), dtype=np.float64)
    xhat_arr = np.empty((n, d), dtype=np.float64)
    inv_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] y = y_arr
    cdef double[:, ::1] xhat = xhat_arr
    cdef double[::1] inv = inv_arr
    cdef Py_ssize_t i, j
    cdef double mu, var, dev, s
    for i in range(n):
        mu = 0.0
        for j in range(d):
            mu += x[i, j]
        mu /= d
        var = 0.0
        for j in range(d):
            dev = x[i, j] - mu
            var += dev * dev
        var /= d
        s = 1.0 / sqrt(var + eps)
        inv[i] = s
        for j in range(d):
            xhat[i, j] = (x[i, j] - mu) * s
            y[i, j] = xhat[i, j] * gamma[j] + beta[j]
    return y_arr, xhat_arr, inv_arr


def layernorm_backward(double[:, ::1] dy, double[:, ::1] xhat,
                       double[::1] inv_std, double[::1] gamma):
    cdef Py_ssize_t n = dy.shape[0], d = dy.shape[1]
    dx_arr = np.empty((n, d), dtype=np.float64)
    dgamma_arr = np.zeros(d, dtype=np.float64)
    dbeta_arr = np.zeros(d, dtype=np.float64)
    cdef double[:, ::1] dx = dx_arr
    cdef double[::1] dgamma = dgamma_arr
    cdef double[::1] dbeta = dbeta_arr
    cdef Py_ssize_t i, j
    cdef double m1, m2, g
    for i in range(n):
        m1 = 0.0
        m2 = 0.0
        for j in range(d):
            g = dy[i, j] * gamma[j]
            m1 += g
            m2 += g * xhat[i, j]
        m1 /= d
        m2 /= d
        for j in range(d):
            dx[i, j] = (dy[i, j] * gamma[j] - m1 - xhat[i, j] * m2) * inv_std[i]
            dgamma[j] += dy[i, j] * xhat[i, j]
            dbeta[j] += dy[i, j]
    return dx_arr, dgamma_arr, dbeta_arr


def gelu_forward(double[:, ::1] x):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    y_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] y = y_arr
    cdef Py_ssize_t i, j
    cdef double v
    for i in range(n):
        for j in range(d):
            v = x[i, j]
            y[i, j] = 0.5 * v * (1.0 + tanh(GELU_C * (v + GELU_A * v * v * v)))
    return y_arr


def gelu_backward(double[:, ::1] x, double[:, ::1] dy):
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    dx_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] dx = dx_arr
    cdef Py_ssize_t i, j
    cdef double v, t, du
    for i in range(n):
        for j in range(d):
            v = x[i, j]
            t = tanh(GELU_C * (v + GELU_A * v * v * v))
            du = GELU_C * (1.0 + 3.0 * GELU_A * v * v)
            dx[i, j] = dy[i, j] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du)
    return dx_arr
