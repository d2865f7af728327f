"""Least squares and orthogonal projection onto span(Phi) via thin QR.

The projector onto the orthogonal complement of the regressor columns is
applied as ``v - Q (Q^T v)`` and is never formed as a dense matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import _kernels
from .errors import DimensionMismatch, NonFinite, RankDeficient

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class RegressorFactorization:
    """Thin QR factorization ``phi = q_thin @ r_upper`` of a full-rank tall matrix."""

    phi: np.ndarray
    q_thin: np.ndarray
    r_upper: np.ndarray
    cond_estimate: float

    @property
    def n_rows(self) -> int:
        return self.phi.shape[0]

    @property
    def n_cols(self) -> int:
        return self.phi.shape[1]


def _as_matrix(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim == 1:
        phi = phi[:, None]
    if phi.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {phi.shape}")
    return phi


def factorize(phi) -> RegressorFactorization:
    """Factorize ``phi``; raises :class:`RankDeficient` if it lacks full column rank."""
    phi = _as_matrix(phi)
    if not np.all(np.isfinite(phi)):
        raise NonFinite("regressor matrix contains NaN or Inf")
    m, n = phi.shape
    if m <= n:
        raise DimensionMismatch(f"need more rows than columns, got {m}x{n}")
    q, r = _kernels.householder_qr(phi)
    diag = np.abs(np.diag(r))
    dmax = diag.max() if n else 0.0
    if dmax == 0.0 or np.any(diag < RANK_RTOL * dmax):
        raise RankDeficient(
            "regressor matrix is rank deficient (rank(Phi) < n_theta_b); "
            "the training data does not satisfy the full-rank assumption"
        )
    phi = phi.copy()
    for arr in (phi, q, r):
        arr.setflags(write=False)
    return RegressorFactorization(phi=phi, q_thin=q, r_upper=r, cond_estimate=float(dmax / diag.min()))


def _check_len(fact: RegressorFactorization, v, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != fact.n_rows:
        raise DimensionMismatch(f"{what} has {v.shape[0]} rows, regressor has {fact.n_rows}")
    return v


def solve_least_squares(fact: RegressorFactorization, b) -> np.ndarray:
    """``argmin_theta ||phi theta - b||_2``.  ``b`` may be a vector or a matrix of columns."""
    b = _check_len(fact, b, "right-hand side")
    return solve_triangular(fact.r_upper, fact.q_thin.T @ b, lower=False)


def apply_projector(fact: RegressorFactorization, v) -> np.ndarray:
    """Component of ``v`` orthogonal to the columns of ``phi``.

    Works column-wise when ``v`` is a matrix.
    """
    v = _check_len(fact, v, "vector")
    q = fact.q_thin
    return v - q @ (q.T @ v)


def gram_inverse_apply(fact: RegressorFactorization, w) -> np.ndarray:
    """``(phi^T phi)^{-1} w`` using two triangular solves with ``R``."""
    w = np.asarray(w, dtype=np.float64)
    y = solve_triangular(fact.r_upper, w, trans="T", lower=False)
    return solve_triangular(fact.r_upper, y, lower=False)
