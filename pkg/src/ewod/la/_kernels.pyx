# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled CSR kernels: sparse mat-vec, Jacobi-preconditioned CG and BiCGStab.

The algorithms mirror ``ewod.la._fallback`` step for step so both backends
produce the same iterates up to floating-point summation order.
"""

import numpy as np
from libc.math cimport sqrt
from libc.stdint cimport int64_t


cdef void _spmv(const int64_t[::1] indptr, const int64_t[::1] indices,
                const double[::1] data, const double[::1] x, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, k, n = indptr.shape[0] - 1
    cdef double acc
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc = acc + data[k] * x[indices[k]]
        out[i] = acc


cdef double _dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(a.shape[0]):
        s = s + a[i] * b[i]
    return s


cdef void _remove_mean(double[::1] a) noexcept nogil:
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double s = 0.0
    for i in range(n):
        s = s + a[i]
    s = s / n
    for i in range(n):
        a[i] = a[i] - s


cdef void _weighted_center(double[::1] x, const double[::1] w, double wsum) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(x.shape[0]):
        s = s + w[i] * x[i]
    s = s / wsum
    for i in range(x.shape[0]):
        x[i] = x[i] - s


cdef double _residual(const int64_t[::1] indptr, const int64_t[::1] indices, const double[::1] data,
                      const double[::1] b, const double[::1] x, double[::1] r, double[::1] work,
                      bint project) noexcept nogil:
    cdef Py_ssize_t i
    _spmv(indptr, indices, data, x, work)
    for i in range(b.shape[0]):
        r[i] = b[i] - work[i]
    if project:
        _remove_mean(r)
    return sqrt(_dot(r, r))


def csr_matvec(const int64_t[::1] indptr, const int64_t[::1] indices,
               const double[::1] data, const double[::1] x):
    out = np.empty(indptr.shape[0] - 1)
    cdef double[::1] o = out
    with nogil:
        _spmv(indptr, indices, data, x, o)
    return out


cdef Py_ssize_t _cg_core(const int64_t[::1] indptr, const int64_t[::1] indices, const double[::1] data,
                         double[::1] b, double[::1] x, double tol, Py_ssize_t max_iter,
                         const double[::1] inv_diag, bint project, const double[::1] w, double wsum,
                         double[::1] r, double[::1] z, double[::1] p, double[::1] ap,
                         double* res) noexcept nogil:
    cdef Py_ssize_t n = b.shape[0], i, it = 0
    cdef double bnorm, rz, rz_new, alpha, beta, pap, rnorm
    if project:
        _remove_mean(b)
    bnorm = sqrt(_dot(b, b))
    if bnorm == 0.0:
        for i in range(n):
            x[i] = 0.0
        res[0] = 0.0
        return 0
    rnorm = _residual(indptr, indices, data, b, x, r, ap, project)
    if rnorm <= tol * bnorm:
        if project:
            _weighted_center(x, w, wsum)
        res[0] = rnorm / bnorm
        return 0
    for i in range(n):
        z[i] = inv_diag[i] * r[i]
        p[i] = z[i]
    rz = _dot(r, z)
    while it < max_iter:
        it += 1
        _spmv(indptr, indices, data, p, ap)
        pap = _dot(p, ap)
        if pap == 0.0:
            break
        alpha = rz / pap
        for i in range(n):
            x[i] = x[i] + alpha * p[i]
            r[i] = r[i] - alpha * ap[i]
        if project:
            _remove_mean(r)
            _weighted_center(x, w, wsum)
        rnorm = sqrt(_dot(r, r))
        if rnorm <= tol * bnorm:
            # confirm with the true residual before accepting
            rnorm = _residual(indptr, indices, data, b, x, r, ap, project)
            if rnorm <= tol * bnorm:
                break
        for i in range(n):
            z[i] = inv_diag[i] * r[i]
        rz_new = _dot(r, z)
        beta = rz_new / rz
        rz = rz_new
        for i in range(n):
            p[i] = z[i] + beta * p[i]
    if project:
        _weighted_center(x, w, wsum)
    rnorm = _residual(indptr, indices, data, b, x, r, ap, project)
    res[0] = rnorm / bnorm
    return it


def cg(const int64_t[::1] indptr, const int64_t[::1] indices, const double[::1] data,
       double[::1] b, double[::1] x, double tol, Py_ssize_t max_iter,
       const double[::1] inv_diag, weights):
    """Preconditioned CG in place on ``x``. Returns (iterations, relative residual)."""
    cdef Py_ssize_t n = b.shape[0], i, it
    cdef bint project = weights is not None
    cdef const double[::1] w = weights if project else np.ones(n)
    cdef double wsum = 0.0, res = 0.0
    cdef double[:, ::1] work = np.zeros((4, n))
    for i in range(n):
        wsum = wsum + w[i]
    with nogil:
        it = _cg_core(indptr, indices, data, b, x, tol, max_iter, inv_diag, project, w, wsum,
                      work[0], work[1], work[2], work[3], &res)
    return it, res


cdef Py_ssize_t _bicgstab_core(const int64_t[::1] indptr, const int64_t[::1] indices,
                               const double[::1] data, const double[::1] b, double[::1] x,
                               double tol, Py_ssize_t max_iter, const double[::1] inv_diag,
                               double[::1] r, double[::1] rh, double[::1] p, double[::1] v,
                               double[::1] ph, double[::1] s, double[::1] sh, double[::1] t,
                               double* res) noexcept nogil:
    cdef Py_ssize_t n = b.shape[0], i, it = 0
    cdef double bnorm, rho, rho_old = 1.0, alpha = 1.0, omega = 1.0, beta, rv, tt, rnorm
    bnorm = sqrt(_dot(b, b))
    if bnorm == 0.0:
        for i in range(n):
            x[i] = 0.0
        res[0] = 0.0
        return 0
    rnorm = _residual(indptr, indices, data, b, x, r, t, False)
    for i in range(n):
        rh[i] = r[i]
    if rnorm <= tol * bnorm:
        res[0] = rnorm / bnorm
        return 0
    while it < max_iter:
        it += 1
        rho = _dot(rh, r)
        if rho == 0.0 or omega == 0.0:
            # breakdown: restart from the current residual
            _residual(indptr, indices, data, b, x, r, t, False)
            for i in range(n):
                rh[i] = r[i]
                p[i] = 0.0
                v[i] = 0.0
            rho_old = 1.0
            alpha = 1.0
            omega = 1.0
            rho = _dot(rh, r)
            if rho == 0.0:
                break
        beta = (rho / rho_old) * (alpha / omega)
        for i in range(n):
            p[i] = r[i] + beta * (p[i] - omega * v[i])
            ph[i] = inv_diag[i] * p[i]
        _spmv(indptr, indices, data, ph, v)
        rv = _dot(rh, v)
        if rv == 0.0:
            omega = 0.0
            continue
        alpha = rho / rv
        for i in range(n):
            s[i] = r[i] - alpha * v[i]
        if sqrt(_dot(s, s)) <= tol * bnorm:
            for i in range(n):
                x[i] = x[i] + alpha * ph[i]
            rnorm = _residual(indptr, indices, data, b, x, r, t, False)
            if rnorm <= tol * bnorm:
                break
            omega = 0.0
            continue
        for i in range(n):
            sh[i] = inv_diag[i] * s[i]
        _spmv(indptr, indices, data, sh, t)
        tt = _dot(t, t)
        omega = _dot(t, s) / tt if tt > 0.0 else 0.0
        for i in range(n):
            x[i] = x[i] + alpha * ph[i] + omega * sh[i]
            r[i] = s[i] - omega * t[i]
        rho_old = rho
        if sqrt(_dot(r, r)) <= tol * bnorm:
            rnorm = _residual(indptr, indices, data, b, x, r, t, False)
            if rnorm <= tol * bnorm:
                break
            omega = 0.0
    rnorm = _residual(indptr, indices, data, b, x, r, t, False)
    res[0] = rnorm / bnorm
    return it


def bicgstab(const int64_t[::1] indptr, const int64_t[::1] indices, const double[::1] data,
             const double[::1] b, double[::1] x, double tol, Py_ssize_t max_iter,
             const double[::1] inv_diag):
    """Right-preconditioned BiCGStab in place on ``x``. Returns (iterations, relative residual)."""
    cdef Py_ssize_t n = b.shape[0], it
    cdef double res = 0.0
    cdef double[:, ::1] work = np.zeros((8, n))
    with nogil:
        it = _bicgstab_core(indptr, indices, data, b, x, tol, max_iter, inv_diag,
                            work[0], work[1], work[2], work[3], work[4], work[5], work[6], work[7], &res)
    return it, res
