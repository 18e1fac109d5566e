# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fused kernels; same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, fabs, log

cnp.import_array()


cdef inline void _check_same(Py_ssize_t n1, Py_ssize_t d1, Py_ssize_t n2, Py_ssize_t d2) except *:
    if n1 != n2 or d1 != d2:
        raise ValueError(f"shape mismatch: ({n1}, {d1}) vs ({n2}, {d2})")


def l1_rows(const double[:, :] a, const double[:, :] b):
    cdef Py_ssize_t n = a.shape[0], d = a.shape[1], i, j
    _check_same(n, d, b.shape[0], b.shape[1])
    vals_arr = np.empty(n)
    grad_arr = np.empty((n, d))
    cdef double[::1] vals = vals_arr
    cdef double[:, ::1] grad = grad_arr
    cdef double diff, s
    for i in range(n):
        s = 0.0
        for j in range(d):
            diff = a[i, j] - b[i, j]
            s += fabs(diff)
            if diff > 0.0:
                grad[i, j] = 1.0
            elif diff < 0.0:
                grad[i, j] = -1.0
            else:
                grad[i, j] = 0.0
        vals[i] = s
    return vals_arr, grad_arr


def kl_rows(const double[:, :] mu, const double[:, :] log_var):
    cdef Py_ssize_t n = mu.shape[0], d = mu.shape[1], i, j
    _check_same(n, d, log_var.shape[0], log_var.shape[1])
    vals_arr = np.empty(n)
    dmu_arr = np.empty((n, d))
    dlv_arr = np.empty((n, d))
    cdef double[::1] vals = vals_arr
    cdef double[:, ::1] dmu = dmu_arr
    cdef double[:, ::1] dlv = dlv_arr
    cdef double m, lv, var, s
    for i in range(n):
        s = 0.0
        for j in range(d):
            m = mu[i, j]
            lv = log_var[i, j]
            var = exp(lv)
            s += m * m + var - lv - 1.0
            dmu[i, j] = m
            dlv[i, j] = 0.5 * (var - 1.0)
        vals[i] = 0.5 * s
    return vals_arr, dmu_arr, dlv_arr


def w2_rows(const double[:, :] mu1, const double[:, :] lv1,
            const double[:, :] mu2, const double[:, :] lv2):
    cdef Py_ssize_t n = mu1.shape[0], d = mu1.shape[1], i, j
    _check_same(n, d, lv1.shape[0], lv1.shape[1])
    _check_same(n, d, mu2.shape[0], mu2.shape[1])
    _check_same(n, d, lv2.shape[0], lv2.shape[1])
    vals_arr = np.empty(n)
    dmu1_arr = np.empty((n, d))
    dlv1_arr = np.empty((n, d))
    dmu2_arr = np.empty((n, d))
    dlv2_arr = np.empty((n, d))
    cdef double[::1] vals = vals_arr
    cdef double[:, ::1] dmu1 = dmu1_arr
    cdef double[:, ::1] dlv1 = dlv1_arr
    cdef double[:, ::1] dmu2 = dmu2_arr
    cdef double[:, ::1] dlv2 = dlv2_arr
    cdef double s, dm, ds, s1, s2, w, inv
    for i in range(n):
        s = 0.0
        # first pass parks the standard deviations in the log-var gradient rows
        for j in range(d):
            s1 = exp(0.5 * lv1[i, j])
            s2 = exp(0.5 * lv2[i, j])
            dlv1[i, j] = s1
            dlv2[i, j] = s2
            dm = mu1[i, j] - mu2[i, j]
            ds = s1 - s2
            s += dm * dm + ds * ds
        w = sqrt(s)
        vals[i] = w
        inv = 1.0 / w if w > 0.0 else 0.0
        for j in range(d):
            s1 = dlv1[i, j]
            s2 = dlv2[i, j]
            dm = (mu1[i, j] - mu2[i, j]) * inv
            ds = (s1 - s2) * inv
            dmu1[i, j] = dm
            dmu2[i, j] = -dm
            dlv1[i, j] = 0.5 * ds * s1
            dlv2[i, j] = -0.5 * ds * s2
    return vals_arr, dmu1_arr, dlv1_arr, dmu2_arr, dlv2_arr


def softmax_xent_rows(const double[:, :] logits, labels):
    cdef const cnp.int64_t[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef Py_ssize_t n = logits.shape[0], c = logits.shape[1], i, j
    if lab.shape[0] != n:
        raise ValueError("labels length mismatch")
    vals_arr = np.empty(n)
    grad_arr = np.empty((n, c))
    cdef double[::1] vals = vals_arr
    cdef double[:, ::1] grad = grad_arr
    cdef double mx, tot, e
    cdef cnp.int64_t y
    for i in range(n):
        y = lab[i]
        if y < 0 or y >= c:
            raise IndexError(f"label {y} out of range for {c} classes")
        mx = logits[i, 0]
        for j in range(1, c):
            if logits[i, j] > mx:
                mx = logits[i, j]
        tot = 0.0
        for j in range(c):
            e = exp(logits[i, j] - mx)
            grad[i, j] = e
            tot += e
        for j in range(c):
            grad[i, j] /= tot
        grad[i, y] -= 1.0
        vals[i] = log(tot) - (logits[i, y] - mx)
    return vals_arr, grad_arr


def adam_update(double[::1] p, const double[::1] g, double[::1] m, double[::1] v,
                double lr, double beta1, double beta2, double eps,
                double bc1, double bc2):
    cdef Py_ssize_t n = p.shape[0], i
    if g.shape[0] != n or m.shape[0] != n or v.shape[0] != n:
        raise ValueError("adam_update: length mismatch")
    cdef double gi, mi, vi
    for i in range(n):
        gi = g[i]
        mi = beta1 * m[i] + (1.0 - beta1) * gi
        vi = beta2 * v[i] + (1.0 - beta2) * (gi * gi)
        m[i] = mi
        v[i] = vi
        p[i] -= lr * (mi / bc1) / (sqrt(vi / bc2) + eps)
