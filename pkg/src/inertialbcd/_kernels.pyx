# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.

Same signatures and semantics as :mod:`inertialbcd._kernels_py`.
"""
import numpy as np
from libc.math cimport sqrt, fabs


ctypedef fused mat_t:
    double[:, ::1]
    double[:, :]


cdef int _sweep(mat_t W, const double[:, :] G, const double[:, :] P,
                const double[:, :] Wh, bint has_hat, double inv_beta,
                double[::1] num, double[::1] g) noexcept nogil:
    cdef Py_ssize_t m = W.shape[0], r = W.shape[1]
    cdef Py_ssize_t i, q, p
    cdef double den, acc, val, gii
    cdef int skipped = 0
    for i in range(r):
        gii = G[i, i]
        den = gii + inv_beta
        if den <= 0.0:
            skipped += 1
            continue
        for q in range(r):
            g[q] = G[q, i]
        for p in range(m):
            acc = 0.0
            for q in range(r):
                acc = acc + W[p, q] * g[q]
            val = P[p, i] - acc + W[p, i] * gii
            if has_hat:
                val = val + inv_beta * Wh[p, i]
            num[p] = val
        for p in range(m):
            val = num[p] / den
            W[p, i] = val if val > 0.0 else 0.0
    return skipped


def column_sweep(W, G, P, W_hat=None, double inv_beta=0.0):
    """In-place proximal HALS sweep over the columns of ``W``.

    Column ``i`` becomes ``max(0, (P[:, i] - W G[:, i] + W[:, i] G[i, i]
    + inv_beta * W_hat[:, i]) / (G[i, i] + inv_beta))``.  Columns whose
    denominator is not positive are left unchanged.  Returns the number of
    skipped columns.
    """
    cdef double[:, :] Wv = W
    cdef const double[:, :] Gv = G
    cdef const double[:, :] Pv = P
    cdef const double[:, :] Wh = Wv
    cdef bint has_hat = W_hat is not None and inv_beta != 0.0
    cdef double[::1] num = np.empty(Wv.shape[0], dtype=np.float64)
    cdef double[::1] g = np.empty(Wv.shape[1], dtype=np.float64)
    cdef double[:, ::1] Wc
    cdef int skipped
    if has_hat:
        Wh = W_hat
    if Wv.is_c_contig():
        Wc = W
        with nogil:
            skipped = _sweep(Wc, Gv, Pv, Wh, has_hat, inv_beta, num, g)
    else:
        with nogil:
            skipped = _sweep(Wv, Gv, Pv, Wh, has_hat, inv_beta, num, g)
    return skipped


def khatri_rao(const double[:, :] A, const double[:, :] B):
    """Column-wise Kronecker product, row ``i * n + j`` is ``A[i] * B[j]``."""
    cdef Py_ssize_t m = A.shape[0], n = B.shape[0], r = A.shape[1]
    cdef Py_ssize_t i, j, c
    out = np.empty((m * n, r), dtype=np.float64)
    cdef double[:, ::1] O = out
    for i in range(m):
        for j in range(n):
            for c in range(r):
                O[i * n + j, c] = A[i, c] * B[j, c]
    return out


def power_iteration(const double[:, :] M, const double[:] x0, double tol,
                    Py_ssize_t max_iter):
    """Largest eigenvalue of a symmetric PSD matrix from unit start ``x0``.

    Returns ``(value, converged, n_iter)``.
    """
    cdef Py_ssize_t n = M.shape[0]
    cdef Py_ssize_t it, a, b
    cdef double lam = 0.0, lam_prev = 0.0, d = 0.0, d_prev = -1.0
    cdef double nrm, acc, q, est
    cdef double[::1] x = np.empty(n, dtype=np.float64)
    cdef double[::1] y = np.empty(n, dtype=np.float64)
    if n == 0:
        return 0.0, True, 0
    for a in range(n):
        x[a] = x0[a]
    for it in range(1, max_iter + 1):
        for a in range(n):
            acc = 0.0
            for b in range(n):
                acc = acc + M[a, b] * x[b]
            y[a] = acc
        lam = 0.0
        nrm = 0.0
        for a in range(n):
            lam = lam + x[a] * y[a]
            nrm = nrm + y[a] * y[a]
        nrm = sqrt(nrm)
        if nrm == 0.0:
            return 0.0, True, it
        for a in range(n):
            x[a] = y[a] / nrm
        if it > 1:
            d = fabs(lam - lam_prev)
            if d <= tol * fabs(lam):
                est = d
                if d_prev > 0.0:
                    q = d / d_prev
                    if q < 1.0:
                        est = d * q / (1.0 - q)
                    else:
                        est = d / tol
                if est <= tol * fabs(lam):
                    return lam, True, it
            d_prev = d
        lam_prev = lam
    return lam, False, max_iter
