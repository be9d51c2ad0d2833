"""Pure numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or when
``INERTIALBCD_PURE_PYTHON=1`` is set.  Semantics match
:mod:`inertialbcd._kernels` exactly; floating point results may differ in
the last bits because summation order differs.
"""
import numpy as np


def column_sweep(W, G, P, W_hat=None, inv_beta=0.0):
    m, r = W.shape
    has_hat = W_hat is not None and inv_beta != 0.0
    skipped = 0
    for i in range(r):
        den = G[i, i] + inv_beta
        if den <= 0.0:
            skipped += 1
            continue
        num = P[:, i] - W @ G[:, i] + W[:, i] * G[i, i]
        if has_hat:
            num = num + inv_beta * W_hat[:, i]
        W[:, i] = np.maximum(num / den, 0.0)
    return skipped


def khatri_rao(A, B):
    m, r = A.shape
    n = B.shape[0]
    return (A[:, None, :] * B[None, :, :]).reshape(m * n, r)


def power_iteration(M, x0, tol, max_iter):
    n = M.shape[0]
    if n == 0:
        return 0.0, True, 0
    x = np.array(x0, dtype=np.float64)
    lam_prev = 0.0
    d_prev = -1.0
    lam = 0.0
    for it in range(1, max_iter + 1):
        y = M @ x
        lam = float(x @ y)
        nrm = float(np.sqrt(y @ y))
        if nrm == 0.0:
            return 0.0, True, it
        x = y / nrm
        if it > 1:
            d = abs(lam - lam_prev)
            if d <= tol * abs(lam):
                est = d
                if d_prev > 0.0:
                    q = d / d_prev
                    est = d * q / (1.0 - q) if q < 1.0 else d / tol
                if est <= tol * abs(lam):
                    return lam, True, it
            d_prev = d
        lam_prev = lam
    return lam, False, max_iter
