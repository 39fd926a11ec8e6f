# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``relata._pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt

cnp.import_array()

ctypedef cnp.int64_t i64

ctypedef fused real:
    float
    double


cdef inline bint _has_key(const i64[::1] keys, i64 key) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = keys.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo < keys.shape[0] and keys[lo] == key


cdef Py_ssize_t _scan(const i64[::1] ids, const i64[::1] offsets, const i64[::1] keys,
                      i64 base, int min_gap, int max_gap,
                      i64[::1] out_i, i64[::1] out_j, bint write) noexcept nogil:
    cdef Py_ssize_t s, i, j, start, stop, n = 0
    cdef int gap
    cdef i64 a, b
    for s in range(offsets.shape[0] - 1):
        start = offsets[s]
        stop = offsets[s + 1]
        for i in range(start, stop):
            a = ids[i]
            if a < 0:
                continue
            for gap in range(min_gap, max_gap + 1):
                j = i + gap + 1
                if j >= stop:
                    break
                b = ids[j]
                if b >= 0 and _has_key(keys, a * base + b):
                    if write:
                        out_i[n] = i
                        out_j[n] = j
                    n += 1
    return n


def scan_windows(ids, offsets, keys, i64 base, int min_gap, int max_gap):
    cdef const i64[::1] ids_v = np.ascontiguousarray(ids, dtype=np.int64)
    cdef const i64[::1] off_v = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const i64[::1] keys_v = np.ascontiguousarray(keys, dtype=np.int64)
    cdef i64[::1] dummy = np.empty(0, dtype=np.int64)
    cdef Py_ssize_t n
    with nogil:
        n = _scan(ids_v, off_v, keys_v, base, min_gap, max_gap, dummy, dummy, False)
    out_i = np.empty(n, dtype=np.int64)
    out_j = np.empty(n, dtype=np.int64)
    cdef i64[::1] oi = out_i, oj = out_j
    with nogil:
        _scan(ids_v, off_v, keys_v, base, min_gap, max_gap, oi, oj, True)
    return out_i, out_j


def _adagrad_flat(real[::1] p, const real[::1] g, real[::1] acc, double lr, double eps):
    cdef Py_ssize_t k
    cdef real gk
    with nogil:
        for k in range(p.shape[0]):
            gk = g[k]
            acc[k] += gk * gk
            p[k] -= <real>(lr * gk / (sqrt(acc[k]) + eps))


def adagrad_dense(param, grad, accum, double lr, double eps):
    if not (param.flags.c_contiguous and accum.flags.c_contiguous):
        raise ValueError("adagrad_dense needs C-contiguous param and accumulator")
    grad = np.ascontiguousarray(grad, dtype=param.dtype)
    _adagrad_flat(param.reshape(-1), grad.reshape(-1), accum.reshape(-1), lr, eps)


def _adagrad_rows(real[:, ::1] p, const i64[::1] rows, const real[:, ::1] g,
                  real[:, ::1] acc, double lr, double eps):
    cdef Py_ssize_t r, k, row
    cdef real gk
    with nogil:
        for r in range(rows.shape[0]):
            row = rows[r]
            for k in range(p.shape[1]):
                gk = g[r, k]
                acc[row, k] += gk * gk
                p[row, k] -= <real>(lr * gk / (sqrt(acc[row, k]) + eps))


def adagrad_rows(param, rows, grad_rows, accum, double lr, double eps):
    if not (param.flags.c_contiguous and accum.flags.c_contiguous):
        raise ValueError("adagrad_rows needs C-contiguous param and accumulator")
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    grad_rows = np.ascontiguousarray(grad_rows, dtype=param.dtype)
    _adagrad_rows(param, rows, grad_rows, accum, lr, eps)


def ppmi_dense(counts):
    cdef double[:, ::1] c = np.ascontiguousarray(counts, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], m = c.shape[1], i, j
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    rs = np.zeros(n, dtype=np.float64)
    cs = np.zeros(m, dtype=np.float64)
    cdef double[::1] r = rs, col = cs
    cdef double total = 0.0, v
    with nogil:
        for i in range(n):
            for j in range(m):
                v = c[i, j]
                r[i] += v
                col[j] += v
                total += v
        for i in range(n):
            for j in range(m):
                v = c[i, j]
                if v > 0:
                    v = log(v * total / (r[i] * col[j]))
                    if v > 0:
                        o[i, j] = v
    return out
