"""Pure numpy implementations of the CSR kernels.

Used when the compiled extension is unavailable (or disabled with
``EWOD_PURE_PYTHON=1``), and for matrix-free operators.
"""

import numpy as np


def csr_matvec(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    rows = np.repeat(np.arange(n), np.diff(indptr))
    return np.bincount(rows, weights=data * x[indices], minlength=n)


def _as_operator(A):
    if callable(A):
        return A
    return lambda v: csr_matvec(A[0], A[1], A[2], v)


def _weighted_center(x, w, wsum):
    x -= np.dot(w, x) / wsum


def cg(A, b, x, tol, max_iter, precond, weights):
    """Preconditioned CG in place on ``x``; ``A`` is a CSR triple or a callable."""
    matvec = _as_operator(A)
    project = weights is not None
    if project:
        wsum = weights.sum()
        b -= b.mean()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x[:] = 0.0
        return 0, 0.0
    r = b - matvec(x)
    if project:
        r -= r.mean()
    rnorm = np.linalg.norm(r)
    if rnorm <= tol * bnorm:
        if project:
            _weighted_center(x, weights, wsum)
        return 0, rnorm / bnorm
    z = precond(r)
    p = z.copy()
    rz = np.dot(r, z)
    it = 0
    while it < max_iter:
        it += 1
        ap = matvec(p)
        pap = np.dot(p, ap)
        if pap == 0.0:
            break
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        if project:
            r -= r.mean()
            _weighted_center(x, weights, wsum)
        rnorm = np.linalg.norm(r)
        if rnorm <= tol * bnorm:
            r = b - matvec(x)
            if project:
                r -= r.mean()
            rnorm = np.linalg.norm(r)
            if rnorm <= tol * bnorm:
                break
        z = precond(r)
        rz_new = np.dot(r, z)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
    r = b - matvec(x)
    if project:
        r -= r.mean()
        _weighted_center(x, weights, wsum)
    return it, np.linalg.norm(r) / bnorm


def bicgstab(A, b, x, tol, max_iter, precond):
    """Right-preconditioned BiCGStab in place on ``x``."""
    matvec = _as_operator(A)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        x[:] = 0.0
        return 0, 0.0
    r = b - matvec(x)
    rh = r.copy()
    if np.linalg.norm(r) <= tol * bnorm:
        return 0, np.linalg.norm(r) / bnorm
    p = np.zeros_like(b)
    v = np.zeros_like(b)
    rho_old = alpha = omega = 1.0
    it = 0
    while it < max_iter:
        it += 1
        rho = np.dot(rh, r)
        if rho == 0.0 or omega == 0.0:
            # breakdown: restart from the current residual
            r = b - matvec(x)
            rh = r.copy()
            p[:] = 0.0
            v[:] = 0.0
            rho_old = alpha = omega = 1.0
            rho = np.dot(rh, r)
            if rho == 0.0:
                break
        beta = (rho / rho_old) * (alpha / omega)
        p = r + beta * (p - omega * v)
        ph = precond(p)
        v = matvec(ph)
        rv = np.dot(rh, v)
        if rv == 0.0:
            omega = 0.0
            continue
        alpha = rho / rv
        s = r - alpha * v
        if np.linalg.norm(s) <= tol * bnorm:
            x += alpha * ph
            r = b - matvec(x)
            if np.linalg.norm(r) <= tol * bnorm:
                break
            rh = r.copy()
            omega = 0.0
            continue
        sh = precond(s)
        t = matvec(sh)
        tt = np.dot(t, t)
        omega = np.dot(t, s) / tt if tt > 0.0 else 0.0
        x += alpha * ph + omega * sh
        r = s - omega * t
        rho_old = rho
        if np.linalg.norm(r) <= tol * bnorm:
            r = b - matvec(x)
            if np.linalg.norm(r) <= tol * bnorm:
                break
            rh = r.copy()
            omega = 0.0
    r = b - matvec(x)
    return it, np.linalg.norm(r) / bnorm
