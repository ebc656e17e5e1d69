"""
Dense complex matrix kernel.

Matrices are plain two-dimensional ``numpy`` arrays of ``complex128`` in
C (row-major) order. The pseudo-inverse follows the explicit right-inverse
formula ``M^+ = M^H (M M^H)^{-1}`` for full-row-rank inputs.
"""

import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lapack, lu_factor, lu_solve

from .errors import DimensionMismatch, RankDeficient

__all__ = ["as_complex_matrix", "conj_transpose", "pseudo_inverse", "RCOND_MIN"]

#: reciprocal condition number of the Gram matrix below which it is singular
RCOND_MIN = 1e-12


def as_complex_matrix(m):
    """Validate and return ``m`` as a C-ordered complex128 matrix."""
    a = np.ascontiguousarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN or Inf entries")
    return a


def conj_transpose(m):
    """Return the conjugate transpose ``M^H`` as a new row-major matrix."""
    a = as_complex_matrix(m)
    return np.ascontiguousarray(a.T.conj())


def pseudo_inverse(m, rcond_min=RCOND_MIN):
    """
    Moore-Penrose right pseudo-inverse of a full-row-rank matrix.

    Parameters
    ----------
    m : array_like, shape (rows, cols)
        Complex matrix with ``rows <= cols`` and rank ``rows``.
    rcond_min : float
        Gram matrices whose estimated reciprocal 1-norm condition number
        falls below this value are rejected.

    Returns
    -------
    ndarray, shape (cols, rows)
        ``M^H (M M^H)^{-1}``, so that ``M @ result`` is the identity.

    Raises
    ------
    DimensionMismatch
        If ``rows > cols``.
    RankDeficient
        If the Gram matrix ``M M^H`` is numerically singular.
    """
    a = as_complex_matrix(m)
    rows, cols = a.shape
    if rows > cols:
        raise DimensionMismatch(f"right pseudo-inverse needs rows <= cols, got {a.shape}")
    gram = a @ a.conj().T
    anorm = np.abs(gram).sum(axis=0).max()
    if anorm == 0.0:
        raise RankDeficient("zero matrix has no right inverse")
    with warnings.catch_warnings():
        # singularity is reported through the condition estimate below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(gram, check_finite=False)
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    if info != 0 or not rcond >= rcond_min:
        raise RankDeficient(f"Gram matrix reciprocal condition {rcond:.3e} < {rcond_min:.0e}")
    # (M M^H)^{-1} M, whose conjugate transpose is M^H (M M^H)^{-1}
    x = lu_solve((lu, piv), a, check_finite=False)
    return np.ascontiguousarray(x.conj().T)
