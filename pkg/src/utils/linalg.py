"""Small dense linear-algebra helpers shared by the coverage and operator code."""

import numpy as np
from scipy.linalg import eigvalsh, lu_factor, lu_solve, svdvals

from src.utils.settings_manager import DEFAULT_SINGULAR_CUTOFF


def is_singular(matrix: np.ndarray, cutoff: float = DEFAULT_SINGULAR_CUTOFF) -> bool:
    """Decide whether a square matrix is numerically singular.

    Parameters
    ----------
    matrix : array_like
        Square matrix.
    cutoff : float, optional
        Relative cutoff. The matrix counts as singular when
        ``sigma_min < cutoff * sigma_max``, i.e. when its 2-norm condition
        number exceeds ``1 / cutoff``.

    Returns
    -------
    bool
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.size == 0 or not np.all(np.isfinite(matrix)):
        return True
    sigma = svdvals(matrix)
    if sigma[0] <= 0.0:
        return True
    return bool(sigma[-1] < cutoff * sigma[0])


def solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``matrix @ x = rhs`` through a pivoted LU factorization."""
    return lu_solve(lu_factor(np.asarray(matrix, dtype=np.float64)), np.asarray(rhs, dtype=np.float64))


def min_eigenvalue(symmetric: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    symmetric = np.asarray(symmetric, dtype=np.float64)
    return float(eigvalsh((symmetric + symmetric.T) / 2.0)[0])
