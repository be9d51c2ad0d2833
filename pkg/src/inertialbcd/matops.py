"""Dense matrix and 3-way tensor kernels shared by the solvers.

Mode unfoldings follow the convention where the column index of the
mode-1 unfolding is ``k * J + j`` (zero based), so that for a CP tensor
``[[X1, X2, X3]]``

    unfold(T, 1) == X1 @ khatri_rao(X3, X2).T
    unfold(T, 2) == X2 @ khatri_rao(X3, X1).T
    unfold(T, 3) == X3 @ khatri_rao(X2, X1).T

Modes are numbered 1, 2, 3 throughout.
"""
import warnings

import numpy as np

from . import kernels
from .errors import ConvergenceWarning, DimensionError

__all__ = [
    "khatri_rao",
    "mode_unfold",
    "mode_fold",
    "cp_reconstruct",
    "operator_norm_psd",
    "nonneg_project",
    "frobenius_norm",
]


def _as_matrix(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def khatri_rao(A, B):
    """Khatri-Rao (column-wise Kronecker) product.

    Parameters
    ----------
    A : (m, r) array_like
    B : (n, r) array_like

    Returns
    -------
    (m*n, r) ndarray
        Row ``i * n + j`` holds ``A[i] * B[j]``.
    """
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise DimensionError(
            f"column counts differ: {A.shape[1]} vs {B.shape[1]}")
    return kernels.khatri_rao(A, B)


def _check_mode(mode):
    if mode not in (1, 2, 3):
        raise DimensionError(f"mode must be 1, 2 or 3, got {mode!r}")


def mode_unfold(T, mode):
    """Mode-``mode`` matricization of a 3-way tensor."""
    T = np.asarray(T, dtype=np.float64)
    if T.ndim != 3:
        raise DimensionError(f"expected a 3-way tensor, got shape {T.shape}")
    _check_mode(mode)
    ax = mode - 1
    return np.moveaxis(T, ax, 0).reshape(T.shape[ax], -1, order="F")


def mode_fold(M, mode, dims):
    """Inverse of :func:`mode_unfold`."""
    M = _as_matrix(M, "M")
    _check_mode(mode)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise DimensionError(f"dims must have 3 entries, got {dims}")
    ax = mode - 1
    rest = [d for q, d in enumerate(dims) if q != ax]
    if M.shape != (dims[ax], rest[0] * rest[1]):
        raise DimensionError(
            f"matrix shape {M.shape} inconsistent with dims {dims}, mode {mode}")
    T = M.reshape((dims[ax], rest[0], rest[1]), order="F")
    return np.moveaxis(T, 0, ax).copy()


def cp_reconstruct(factors):
    """Full tensor ``sum_c X1[:, c] o X2[:, c] o X3[:, c]``."""
    X1, X2, X3 = (np.asarray(f, dtype=np.float64) for f in factors)
    if not X1.shape[1] == X2.shape[1] == X3.shape[1]:
        raise DimensionError("factor column counts differ")
    M = X1 @ khatri_rao(X3, X2).T
    return mode_fold(M, 1, (X1.shape[0], X2.shape[0], X3.shape[0]))


def operator_norm_psd(M, tol=1e-9, max_iter=1000, full_output=False):
    """Largest eigenvalue of a symmetric positive semidefinite matrix.

    Power iteration from the normalized all-ones vector, so the result is
    deterministic.  Iteration stops once the Rayleigh quotient's relative
    change, extrapolated by the observed contraction ratio, is below
    ``tol``.

    Parameters
    ----------
    M : (n, n) array_like
    tol : float
        Relative accuracy target.
    max_iter : int
    full_output : bool
        Also return ``converged`` and ``n_iter``.

    Returns
    -------
    value : float
    converged : bool
        Only with ``full_output``.
    n_iter : int
        Only with ``full_output``.
    """
    M = _as_matrix(M, "M")
    n = M.shape[0]
    if M.shape[1] != n:
        raise DimensionError(f"matrix must be square, got {M.shape}")
    x0 = np.full(n, 1.0 / np.sqrt(n)) if n else np.empty(0)
    value, converged, n_iter = kernels.power_iteration(M, x0, tol, max_iter)
    if value == 0.0 and n and np.trace(M) > 0.0:
        # all-ones start lies in the null space; restart on the largest diagonal
        x0 = np.zeros(n)
        x0[int(np.argmax(np.diag(M)))] = 1.0
        value, converged, n_iter = kernels.power_iteration(M, x0, tol, max_iter)
    value = float(value)
    if not converged:
        warnings.warn(
            f"power iteration did not converge in {max_iter} iterations",
            ConvergenceWarning, stacklevel=2)
    if full_output:
        return value, bool(converged), int(n_iter)
    return value


def nonneg_project(M):
    """Entrywise ``max(0, M)``."""
    return np.maximum(np.asarray(M, dtype=np.float64), 0.0)


def frobenius_norm(M):
    """Frobenius norm of a matrix or tensor."""
    a = np.asarray(M, dtype=np.float64).ravel()
    return float(np.sqrt(a @ a))
