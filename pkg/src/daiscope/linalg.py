"""Guarded inversion of symmetric positive (semi)definite information matrices."""

from __future__ import annotations

import numpy as np
import scipy.linalg

COND_LIMIT = 1e12


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, name: str, detail: str):
        self.name = name
        self.detail = detail
        super().__init__(f"{name} is singular or ill-conditioned: {detail}")


def scaled_condition(matrix: np.ndarray) -> float:
    """2-norm condition number after symmetric Jacobi (diagonal) equilibration.

    Equilibration removes the dependence on parameter units, so mixed
    delay/angle blocks are judged on their geometry rather than their scaling.
    """
    d = np.diag(matrix)
    if np.any(d <= 0) or not np.all(np.isfinite(matrix)):
        return np.inf
    s = 1.0 / np.sqrt(d)
    eq = matrix * s[:, None] * s[None, :]
    w = np.linalg.eigvalsh(0.5 * (eq + eq.T))
    if w[0] <= 0:
        return np.inf
    return float(w[-1] / w[0])


def inv_spd(matrix: np.ndarray, name: str = "matrix", cond_limit: float = COND_LIMIT) -> np.ndarray:
    """Inverse via Cholesky; raises :class:`SingularMatrixError` instead of
    returning a pseudo-inverse."""
    matrix = np.asarray(matrix, dtype=float)
    sym = 0.5 * (matrix + matrix.T)
    cond = scaled_condition(sym)
    if not cond < cond_limit:
        raise SingularMatrixError(name, f"condition estimate {cond:.3g} >= {cond_limit:.0e}")
    try:
        factor = scipy.linalg.cho_factor(sym, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(name, str(exc)) from exc
    inv = scipy.linalg.cho_solve(factor, np.eye(sym.shape[0]))
    return 0.5 * (inv + inv.T)


def min_eig_ratio(matrix: np.ndarray) -> float:
    """Smallest eigenvalue divided by the largest absolute eigenvalue."""
    w = np.linalg.eigvalsh(0.5 * (matrix + matrix.T))
    top = np.max(np.abs(w))
    return float(w[0] / top) if top > 0 else 0.0
