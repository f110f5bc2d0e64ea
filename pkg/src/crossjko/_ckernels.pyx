# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_kernels_py``; same signatures."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def pav(y, w):
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    if n == 0:
        return out
    cdef double[::1] mean = np.empty(n, dtype=np.float64)
    cdef double[::1] wt = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t[::1] start = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t top = -1
    cdef Py_ssize_t i, j
    cdef double wsum
    for i in range(n):
        top += 1
        mean[top] = yv[i]
        wt[top] = wv[i]
        start[top] = i
        while top > 0 and mean[top - 1] > mean[top]:
            wsum = wt[top - 1] + wt[top]
            mean[top - 1] = (wt[top - 1] * mean[top - 1] + wt[top] * mean[top]) / wsum
            wt[top - 1] = wsum
            top -= 1
    for i in range(top + 1):
        j = start[i]
        while j < (start[i + 1] if i < top else n):
            ov[j] = mean[i]
            j += 1
    return out


cdef inline Py_ssize_t _bisect_right(const double[::1] a, double x) noexcept nogil:
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = a.shape[0]
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if x < a[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def cdf_at(nodes, levels, x):
    cdef const double[::1] yv = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(levels, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0] - 1
    cdef Py_ssize_t m = xv.shape[0]
    out = np.empty(m, dtype=np.float64)
    idx = np.empty(m, dtype=np.int64)
    cdef double[::1] ov = out
    cdef long long[::1] iv = idx
    cdef Py_ssize_t i, k
    with nogil:
        for i in range(m):
            k = _bisect_right(yv, xv[i]) - 1
            iv[i] = k
            if k < 0:
                ov[i] = sv[0]
            elif k >= n:
                ov[i] = sv[n]
            else:
                ov[i] = sv[k] + (sv[k + 1] - sv[k]) * (xv[i] - yv[k]) / (yv[k + 1] - yv[k])
    return out, idx


def cdf_adjoint(nodes, levels, x, idx, wbar):
    cdef const double[::1] yv = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(levels, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const long long[::1] iv = np.ascontiguousarray(idx, dtype=np.int64)
    cdef const double[::1] bv = np.ascontiguousarray(wbar, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0] - 1
    grad = np.zeros(n + 1, dtype=np.float64)
    cdef double[::1] gv = grad
    cdef Py_ssize_t i, k
    cdef double inv, common
    with nogil:
        for i in range(xv.shape[0]):
            k = iv[i]
            if k < 0 or k >= n:
                continue
            inv = 1.0 / (yv[k + 1] - yv[k])
            common = bv[i] * (sv[k + 1] - sv[k]) * inv * inv
            gv[k] -= common * (yv[k + 1] - xv[i])
            gv[k + 1] -= common * (xv[i] - yv[k])
    return grad


def interval_cost(nodes, ref, masses):
    cdef const double[::1] yv = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef const double[::1] rv = np.ascontiguousarray(ref, dtype=np.float64)
    cdef const double[::1] mv = np.ascontiguousarray(masses, dtype=np.float64)
    cdef Py_ssize_t n = mv.shape[0]
    grad = np.zeros(n + 1, dtype=np.float64)
    cdef double[::1] gv = grad
    cdef double cost = 0.0
    cdef double a, b
    cdef Py_ssize_t j
    with nogil:
        for j in range(n):
            a = yv[j] - rv[j]
            b = yv[j + 1] - rv[j + 1]
            cost += mv[j] * (a * a + a * b + b * b)
            gv[j] += mv[j] * (2.0 * a + b) / 3.0
            gv[j + 1] += mv[j] * (a + 2.0 * b) / 3.0
    return cost / 3.0, grad


def upwind_flux(rho, vel):
    cdef const double[::1] rv = np.ascontiguousarray(rho, dtype=np.float64)
    cdef const double[::1] vv = np.ascontiguousarray(vel, dtype=np.float64)
    cdef Py_ssize_t m = vv.shape[0]
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t j
    with nogil:
        for j in range(m):
            if vv[j] > 0.0:
                ov[j] = rv[j] * vv[j]
            else:
                ov[j] = rv[j + 1] * vv[j]
    return out


def toeplitz_conv(kvals, rho):
    cdef const double[::1] kv = np.ascontiguousarray(kvals, dtype=np.float64)
    cdef const double[::1] rv = np.ascontiguousarray(rho, dtype=np.float64)
    cdef Py_ssize_t n = rv.shape[0]
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t j, k
    cdef double acc
    with nogil:
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc = acc + kv[j - k + n - 1] * rv[k]
            ov[j] = acc
    return out
