# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled reduction kernels: compensated sums, central moments, Hermite
chains, and elementwise compensated accumulation.

Semantics match ``_ref`` (the numpy reference); see there for the contracts.
Matrix-shaped work is deliberately left to BLAS.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

BACKEND = "cython"


def neumaier_sum(x):
    """Compensated (Neumaier) sum of a 1-d double array."""
    cdef double[::1] v = np.ascontiguousarray(x, dtype=np.float64)
    return _neumaier(v)


cdef double _neumaier(double[::1] v) noexcept nogil:
    cdef double s = 0.0, c = 0.0, t, y
    cdef Py_ssize_t i
    for i in range(v.shape[0]):
        y = v[i]
        t = s + y
        if fabs(s) >= fabs(y):
            c += (s - t) + y
        else:
            c += (y - t) + s
        s = t
    return s + c


def central_moments(x):
    """Return (n, mean, m2, m3, m4); see the reference implementation."""
    cdef double[::1] v = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0]
    if n == 0:
        raise ValueError("cannot take moments of an empty sample")
    cdef double mean = _neumaier(v) / n
    cdef double s2 = 0.0, c2 = 0.0, s3 = 0.0, c3 = 0.0, s4 = 0.0, c4 = 0.0
    cdef double d, d2, y, t
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            d = v[i] - mean
            d2 = d * d
            # Neumaier step for each power
            y = d2
            t = s2 + y
            if fabs(s2) >= fabs(y):
                c2 += (s2 - t) + y
            else:
                c2 += (y - t) + s2
            s2 = t
            y = d2 * d
            t = s3 + y
            if fabs(s3) >= fabs(y):
                c3 += (s3 - t) + y
            else:
                c3 += (y - t) + s3
            s3 = t
            y = d2 * d2
            t = s4 + y
            if fabs(s4) >= fabs(y):
                c4 += (s4 - t) + y
            else:
                c4 += (y - t) + s4
            s4 = t
    return n, mean, (s2 + c2) / n, (s3 + c3) / n, (s4 + c4) / n


def hermite_batch(x, int n):
    """Probabilists' Hermite polynomial He_n, elementwise."""
    if n < 0:
        raise ValueError("Hermite order must be >= 0")
    arr = np.ascontiguousarray(x, dtype=np.float64)
    shape = arr.shape
    cdef double[::1] v = arr.ravel()
    out = np.empty(v.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    cdef double prev, cur, nxt, xi
    cdef Py_ssize_t i
    cdef int k
    with nogil:
        for i in range(v.shape[0]):
            xi = v[i]
            prev = 1.0
            if n == 0:
                o[i] = 1.0
                continue
            cur = xi
            for k in range(1, n):
                nxt = xi * cur - k * prev
                prev = cur
                cur = nxt
            o[i] = cur
    return out.reshape(shape)


def kahan_step(acc, comp, vals):
    """In-place elementwise Neumaier accumulation: acc += vals, error in comp."""
    cdef double[::1] a = acc
    cdef double[::1] c = comp
    cdef double[::1] v = np.ascontiguousarray(vals, dtype=np.float64)
    if a.shape[0] != c.shape[0] or a.shape[0] != v.shape[0]:
        raise ValueError("kahan_step operands must have equal length")
    cdef double t, y
    cdef Py_ssize_t i
    with nogil:
        for i in range(a.shape[0]):
            y = v[i]
            t = a[i] + y
            if fabs(a[i]) >= fabs(y):
                c[i] += (a[i] - t) + y
            else:
                c[i] += (y - t) + a[i]
            a[i] = t
