# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled chain kernels; see ``_pykernels`` for the reference semantics."""

import numpy as np

from libc.math cimport sqrt


cdef inline double _log_target(const double[::1] w, double prec, const double[::1] shift) noexcept nogil:
    cdef Py_ssize_t j
    cdef double sq = 0.0
    cdef double lin = 0.0
    for j in range(w.shape[0]):
        sq += w[j] * w[j]
        lin += shift[j] * w[j]
    return -0.5 * prec * sq + lin


def mh_quadratic(w0, double prec, shift, double scale, z, log_u):
    cdef const double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] uv = np.ascontiguousarray(log_u, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(shift, dtype=np.float64)
    cdef Py_ssize_t steps = zv.shape[0], d = zv.shape[1], t, j
    out = np.empty((steps, d))
    cur_a = np.array(w0, dtype=np.float64, copy=True)
    prop_a = np.empty(d)
    cdef double[:, ::1] o = out
    cdef double[::1] cur = cur_a
    cdef double[::1] prop = prop_a
    cdef double e_cur, e_prop
    cdef long accepted = 0
    with nogil:
        e_cur = _log_target(cur, prec, sv)
        for t in range(steps):
            for j in range(d):
                prop[j] = cur[j] + scale * zv[t, j]
            e_prop = _log_target(prop, prec, sv)
            if uv[t] < e_prop - e_cur:
                for j in range(d):
                    cur[j] = prop[j]
                e_cur = e_prop
                accepted += 1
            for j in range(d):
                o[t, j] = cur[j]
    return out, accepted


def mh_finite(long s0, log_target, r, log_u):
    cdef const double[::1] lt = np.ascontiguousarray(log_target, dtype=np.float64)
    cdef const long long[::1] rv = np.ascontiguousarray(r, dtype=np.int64)
    cdef const double[::1] uv = np.ascontiguousarray(log_u, dtype=np.float64)
    cdef Py_ssize_t steps = rv.shape[0], t
    cdef long k = lt.shape[0]
    cdef long cur = s0, prop
    cdef long accepted = 0
    out = np.empty(steps, dtype=np.int64)
    cdef long long[::1] o = out
    with nogil:
        for t in range(steps):
            prop = (cur + 1 + rv[t]) % k
            if uv[t] < lt[prop] - lt[cur]:
                cur = prop
                accepted += 1
            o[t] = cur
    return out, accepted


def ula_quadratic_path(w0, double prec, shift, double gamma, noise, double noise_scale, double max_norm):
    cdef const double[:, ::1] nv = np.ascontiguousarray(noise, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(shift, dtype=np.float64)
    cdef Py_ssize_t steps = nv.shape[0], d = nv.shape[1], t, j
    cdef Py_ssize_t diverged = -1
    cdef double c = sqrt(2.0 * gamma) * noise_scale
    cdef double lim = max_norm * max_norm
    cdef double sq
    w_a = np.array(w0, dtype=np.float64, copy=True)
    cdef double[::1] w = w_a
    out = np.empty((steps, d))
    cdef double[:, ::1] o = out
    with nogil:
        for t in range(steps):
            sq = 0.0
            for j in range(d):
                w[j] = w[j] - gamma * (prec * w[j] - sv[j]) + c * nv[t, j]
                sq += w[j] * w[j]
            for j in range(d):
                o[t, j] = w[j]
            if not sq <= lim:
                diverged = t
                break
    if diverged >= 0:
        return out[: diverged + 1], diverged
    return out, -1


def ula_quadratic_batch(double[:, ::1] w, double prec, shift, double gamma, noise, double noise_scale,
                        double max_norm):
    cdef const double[:, :, ::1] nv = np.ascontiguousarray(noise, dtype=np.float64)
    cdef const double[:, ::1] sv = np.ascontiguousarray(shift, dtype=np.float64)
    cdef Py_ssize_t steps = nv.shape[0], b = nv.shape[1], d = nv.shape[2], t, i, j
    cdef double c = sqrt(2.0 * gamma) * noise_scale
    cdef double lim = max_norm * max_norm
    cdef double sq
    cdef Py_ssize_t diverged = -1
    with nogil:
        for t in range(steps):
            for i in range(b):
                sq = 0.0
                for j in range(d):
                    w[i, j] = w[i, j] - gamma * (prec * w[i, j] - sv[i, j]) + c * nv[t, i, j]
                    sq += w[i, j] * w[i, j]
                if not sq <= lim:
                    diverged = t
            if diverged >= 0:
                break
    return diverged
