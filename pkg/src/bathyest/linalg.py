"""Dense SPD helpers shared by the covariance-based modules."""

from __future__ import annotations

import numpy as np


class FactorizationError(RuntimeError):
    """Cholesky factorization failed (matrix not numerically SPD)."""


def cholesky_with_jitter(
    mat: np.ndarray,
    scale: float | None = None,
    base_jitter: float = 1e-10,
    max_doublings: int = 8,
) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, escalating diagonal jitter on failure.

    Smooth-kernel covariances are frequently indefinite at machine
    precision; a jitter of base_jitter * scale is added to the diagonal and
    doubled up to max_doublings times before giving up.  Returns (L, jitter)
    where jitter is the amount actually added (0.0 when none was needed).
    """
    mat = np.asarray(mat, dtype=np.float64)
    if mat.shape[0] != mat.shape[1]:
        raise ValueError(f"matrix must be square, got {mat.shape}")
    if mat.shape[0] == 0:
        return np.zeros((0, 0)), 0.0
    if scale is None:
        scale = float(np.max(np.diag(mat)))
        if scale <= 0:
            scale = 1.0
    try:
        return np.linalg.cholesky(mat), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = base_jitter * scale
    eye = np.eye(mat.shape[0])
    for _ in range(max_doublings + 1):
        try:
            return np.linalg.cholesky(mat + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 2.0
    raise FactorizationError(
        f"Cholesky failed up to jitter {jitter / 2.0:.3e} "
        f"(n={mat.shape[0]}, diag range [{np.min(np.diag(mat)):.3e}, "
        f"{np.max(np.diag(mat)):.3e}])"
    )


def chol_solve(chol_lower: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve A x = rhs given the lower Cholesky factor of A."""
    from scipy.linalg import solve_triangular

    half = solve_triangular(chol_lower, rhs, lower=True)
    return solve_triangular(chol_lower.T, half, lower=False)


def symmetrize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)
