"""Cholesky factorization with escalating diagonal jitter."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cholesky, solve_triangular


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Covariance stayed non-positive-definite after maximum jitter."""


# Jitter starts at JITTER_START * trace(K)/n and escalates tenfold per
# attempt until JITTER_MAX * trace(K)/n.
JITTER_START = 1e-10
JITTER_MAX = 1e-4


def chol_with_jitter(C: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``C`` (+ jitter * I if needed).

    Returns ``(L, jitter)`` where ``jitter`` is the diagonal boost that was
    actually applied (0.0 when ``C`` factorized as given).
    """
    C = np.asarray(C, dtype=float)
    n = C.shape[0]
    scale = float(np.trace(C)) / n if n else 1.0
    if scale <= 0 or not np.isfinite(scale):
        scale = 1.0
    jitter = 0.0
    while True:
        try:
            L = cholesky(C + jitter * np.eye(n), lower=True, check_finite=False)
            return L, jitter
        except np.linalg.LinAlgError:
            if jitter >= JITTER_MAX * scale:
                raise NotPositiveDefiniteError(
                    f"matrix not positive definite at jitter {jitter:.3e}"
                ) from None
            jitter = JITTER_START * scale if jitter == 0.0 else jitter * 10.0


def chol_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``L L^T x = b`` given the lower factor."""
    z = solve_triangular(L, b, lower=True, check_finite=False)
    return solve_triangular(L.T, z, lower=False, check_finite=False)


def chol_inverse(L: np.ndarray) -> np.ndarray:
    """Dense inverse of ``L L^T``; only used where the full matrix is needed."""
    W = solve_triangular(L, np.eye(L.shape[0]), lower=True, check_finite=False)
    return W.T @ W
