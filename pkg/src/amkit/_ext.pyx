# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``amkit._ext_py``.

Signatures and semantics match the numpy module exactly; loops run without
the GIL so trial-level threads scale.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, pow
from libc.stdlib cimport malloc, free

cnp.import_array()

DEF POWER = 0


cdef inline double _sep(double z, int code, int n) noexcept nogil:
    if code == POWER:
        if n == 2:
            return z
        if n == 3:
            return z * z
        return pow(z, n - 1)
    return exp(z)


def async_sweep(const double[:, ::1] xi, double[::1] sigma, const long[::1] order, int code, int n):
    cdef Py_ssize_t D = xi.shape[0], K = xi.shape[1], D_order = order.shape[0]
    cdef Py_ssize_t t, i, j, mu
    cdef double h, s_i, new, shift, a
    cdef double *m = <double *> malloc(K * sizeof(double))
    if m == NULL:
        raise MemoryError()
    try:
        with nogil:
            for mu in range(K):
                m[mu] = 0.0
            for j in range(D):
                for mu in range(K):
                    m[mu] += xi[j, mu] * sigma[j]
            for t in range(D_order):
                i = order[t]
                s_i = sigma[i]
                shift = 0.0
                if code != POWER:
                    shift = m[0] - xi[i, 0] * s_i
                    for mu in range(1, K):
                        a = m[mu] - xi[i, mu] * s_i
                        if a > shift:
                            shift = a
                h = 0.0
                for mu in range(K):
                    h += xi[i, mu] * _sep(m[mu] - xi[i, mu] * s_i - shift, code, n)
                new = 1.0 if h >= 0.0 else -1.0
                if new != s_i:
                    for mu in range(K):
                        m[mu] += xi[i, mu] * (new - s_i)
                    sigma[i] = new
    finally:
        free(m)
    return np.asarray(sigma)


def unstable_spins(const double[:, ::1] xi, int code, int n):
    cdef Py_ssize_t D = xi.shape[0], K = xi.shape[1]
    cdef Py_ssize_t i, j, mu
    cdef double h, t_i, a, shift
    cdef long flips = 0
    cdef double *m = <double *> malloc(K * sizeof(double))
    if m == NULL:
        raise MemoryError()
    try:
        with nogil:
            for mu in range(K):
                m[mu] = 0.0
            for j in range(D):
                for mu in range(K):
                    m[mu] += xi[j, mu] * xi[j, 0]
            for i in range(D):
                t_i = xi[i, 0]
                shift = 0.0
                if code != POWER:
                    shift = m[0] - xi[i, 0] * t_i
                    for mu in range(1, K):
                        a = m[mu] - xi[i, mu] * t_i
                        if a > shift:
                            shift = a
                h = 0.0
                for mu in range(K):
                    h += xi[i, mu] * _sep(m[mu] - xi[i, mu] * t_i - shift, code, n)
                if (1.0 if h >= 0.0 else -1.0) != t_i:
                    flips += 1
    finally:
        free(m)
    return int(flips)


def gauss_descent(V_in, const double[:, ::1] X, double a, double scale, double eta,
                  long steps, double stop_tol, const double[::1] mask):
    cdef double[:, ::1] V = np.array(V_in, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t M = V.shape[0], D = V.shape[1], K = X.shape[0]
    conv_arr = np.zeros(M, dtype=np.uint8)
    taken_arr = np.zeros(M, dtype=np.int64)
    cdef unsigned char[::1] converged = conv_arr
    cdef long[::1] taken = taken_arr
    cdef Py_ssize_t p, t, mu, d
    cdef double s, diff, top, total, gmax, coef = 2.0 * a * scale
    cdef double *w = <double *> malloc(K * sizeof(double))
    cdef double *g = <double *> malloc(D * sizeof(double))
    if w == NULL or g == NULL:
        free(w)
        free(g)
        raise MemoryError()
    try:
        with nogil:
            for p in range(M):
                for t in range(steps + 1):
                    top = -1e308
                    for mu in range(K):
                        s = 0.0
                        for d in range(D):
                            diff = V[p, d] - X[mu, d]
                            s += diff * diff
                        w[mu] = -a * s
                        if w[mu] > top:
                            top = w[mu]
                    total = 0.0
                    for mu in range(K):
                        w[mu] = exp(w[mu] - top)
                        total += w[mu]
                    gmax = 0.0
                    for d in range(D):
                        s = 0.0
                        for mu in range(K):
                            s += w[mu] * (V[p, d] - X[mu, d])
                        g[d] = coef * (s / total) * mask[d]
                        if fabs(g[d]) > gmax:
                            gmax = fabs(g[d])
                    if gmax < stop_tol:
                        converged[p] = 1
                        break
                    if t == steps:
                        break
                    for d in range(D):
                        V[p, d] = V[p, d] - eta * g[d]
                    taken[p] += 1
    finally:
        free(w)
        free(g)
    return np.asarray(V), conv_arr.astype(bool), taken_arr
