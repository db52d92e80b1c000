# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same contracts and results as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, rint

cnp.import_array()

cdef double SCORE_QUANTUM = 1e9


def advance(double[::1] x, double[::1] y, double[::1] tx, double[::1] ty,
            double[::1] speed, double[::1] wait_until, const unsigned char[::1] moving,
            double t0, double dt, double[::1] leftover):
    cdef Py_ssize_t n = x.shape[0], i, k = 0
    cdef double dx, dy, dist, step, f
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(n, dtype=np.int64)
    for i in range(n):
        if not moving[i] or wait_until[i] > t0:
            continue
        dx = tx[i] - x[i]
        dy = ty[i] - y[i]
        dist = sqrt(dx * dx + dy * dy)
        step = speed[i] * dt
        if step >= dist:
            x[i] = tx[i]
            y[i] = ty[i]
            leftover[i] = step - dist
            out[k] = i
            k += 1
        else:
            f = step / dist
            x[i] = x[i] + dx * f
            y[i] = y[i] + dy * f
    return out[:k]


def range_pairs(double[::1] x, double[::1] y, double r):
    cdef Py_ssize_t n = x.shape[0], i, j, k = 0, cap = 64
    cdef double r2 = r * r, dx, dy, xi, yi
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(cap, dtype=np.int64)
    for i in range(n):
        xi = x[i]
        yi = y[i]
        for j in range(i + 1, n):
            dx = xi - x[j]
            dy = yi - y[j]
            if dx * dx + dy * dy <= r2:
                if k == cap:
                    cap *= 2
                    out = np.resize(out, cap)
                out[k] = i * n + j
                k += 1
    return out[:k].copy()


def split_scan(double[::1] values, cnp.int64_t[::1] labels):
    cdef Py_ssize_t n = values.shape[0], i
    cdef double total = 0.0, ones = 0.0, nl, nr, zl, zr, r1, score, key
    cdef double best = -1.0, thr = 0.0
    if n < 2:
        return -1.0, 0.0
    for i in range(n):
        total += labels[i]
    for i in range(n - 1):
        ones += labels[i]
        if values[i] == values[i + 1]:
            continue
        nl = <double>(i + 1)
        nr = <double>n - nl
        zl = nl - ones
        r1 = total - ones
        zr = nr - r1
        score = (zl * zl + ones * ones) / nl + (zr * zr + r1 * r1) / nr
        key = rint(score * SCORE_QUANTUM)
        if key > best:
            best = key
            thr = (values[i] + values[i + 1]) / 2.0
    return best, thr
