"""Baseline-parameter error formulas and the asymptotic covariance estimate."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .augmentation import AugmentedModel, Structure, predict_test_batch
from .errors import DimensionMismatch, SingularGram
from .linalg import RegressorFactorization, apply_projector, factorize, solve_least_squares
from .mlp import jacobian_batch
from .regressor import Dataset, assemble_phi, build_states

ZERO_THRESHOLD = 1e-6
GRAM_RTOL = 1e-10


@dataclass(frozen=True)
class ErrorReport:
    theta_b_error: float
    theoretical_orth_error: float
    theoretical_std_error: float | None
    orthogonality_defect: float

    def to_dict(self) -> dict:
        return {
            "theta_b_error": self.theta_b_error,
            "theoretical_orth_error": self.theoretical_orth_error,
            "theoretical_std_error": self.theoretical_std_error,
            "orthogonality_defect": self.orthogonality_defect,
        }


def orthogonality_defect(phi, delta) -> float:
    """``||Phi^T Delta||_2``; zero when the unmodeled terms are orthogonal to the regressors on the data.

    Each inner product is summed with ``math.fsum`` (exactly rounded), so
    mirrored +/- sample pairs cancel exactly regardless of their order.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim == 1:
        phi = phi[:, None]
    delta = np.asarray(delta, dtype=np.float64).ravel()
    if delta.shape[0] != phi.shape[0]:
        raise DimensionMismatch(f"delta has {delta.shape[0]} rows, phi has {phi.shape[0]}")
    prods = phi * delta[:, None]
    return float(np.linalg.norm([math.fsum(prods[:, j]) for j in range(phi.shape[1])]))


def theoretical_orth_error(fact: RegressorFactorization, delta) -> float:
    """Baseline error of an exactly fitted orthogonal model: ``||(Phi^T Phi)^-1 Phi^T Delta||``.

    Returns exactly 0 when every inner product ``Phi^T Delta`` sums to zero,
    since the QR solve would otherwise leave round-off of order eps * ||Delta||.
    """
    delta = np.ravel(np.asarray(delta, dtype=np.float64))
    if orthogonality_defect(fact.phi, delta) == 0.0:
        return 0.0
    return float(np.linalg.norm(solve_least_squares(fact, delta)))


def theoretical_std_error(fact: RegressorFactorization, f_ann, delta) -> float:
    """Baseline error of an exactly fitted standard model whose network output is ``f_ann``."""
    f_ann = np.ravel(np.asarray(f_ann, dtype=np.float64))
    delta = np.ravel(np.asarray(delta, dtype=np.float64))
    if f_ann.shape != delta.shape:
        raise DimensionMismatch("f_ann and delta must have the same length")
    return float(np.linalg.norm(solve_least_squares(fact, f_ann - delta)))


def error_report(model: AugmentedModel, fact: RegressorFactorization, delta, theta_star, f_ann=None) -> ErrorReport:
    theta_star = np.asarray(theta_star, dtype=np.float64)
    return ErrorReport(
        theta_b_error=float(np.linalg.norm(theta_star - model.theta_b)),
        theoretical_orth_error=theoretical_orth_error(fact, delta),
        theoretical_std_error=None if f_ann is None else theoretical_std_error(fact, f_ann, delta),
        orthogonality_defect=orthogonality_defect(fact.phi, delta),
    )


@dataclass(frozen=True)
class CovarianceReport:
    p_hat: np.ndarray
    n_theta_b: int
    max_cross_block: float
    sigma_hat: np.ndarray
    sigma_full: np.ndarray
    n_samples: int
    gram_rank: int
    gram_rank_b: int
    gram_rank_a: int

    @property
    def cov(self) -> np.ndarray:
        """Approximate ``Cov(theta_hat) = P_hat / N``."""
        return self.p_hat / self.n_samples

    def zero_mask(self, threshold: float = ZERO_THRESHOLD) -> np.ndarray:
        return np.abs(self.p_hat) < threshold

    def to_dict(self) -> dict:
        return {
            "n_theta_b": self.n_theta_b,
            "n_samples": self.n_samples,
            "max_cross_block": self.max_cross_block,
            "cross_block_numerically_zero": bool(self.max_cross_block < ZERO_THRESHOLD),
            "zero_threshold": ZERO_THRESHOLD,
            "gram_rank": self.gram_rank,
            "gram_rank_b": self.gram_rank_b,
            "gram_rank_a": self.gram_rank_a,
            "sigma_hat": self.sigma_hat.tolist(),
            "sigma_full": self.sigma_full.tolist(),
            "p_hat": self.p_hat.tolist(),
        }


def _rank(sym: np.ndarray, rtol: float) -> int:
    if sym.size == 0:
        return 0
    ev = np.linalg.eigvalsh(sym)
    top = ev.max()
    return int(np.sum(ev > rtol * top)) if top > 0 else 0


def sandwich_covariance(psi, residuals, n_theta_b: int, strict: bool = False, rtol: float = GRAM_RTOL) -> CovarianceReport:
    """Sandwich estimate ``A^+ B A^+`` from per-sample prediction Jacobians.

    ``psi`` has shape (N, n_y, n_theta) with the baseline columns first and
    ``residuals`` has shape (N, n_y).  The residual covariance is forced
    diagonal.  ``A`` is inverted as a whole with a symmetric pseudo-inverse
    (relative cutoff ``rtol``) because overparametrized networks give a
    singular learning-component block; ``strict=True`` raises instead.
    """
    psi = np.asarray(psi, dtype=np.float64)
    res = np.asarray(residuals, dtype=np.float64)
    n, n_y, n_theta = psi.shape
    if res.shape != (n, n_y):
        raise DimensionMismatch(f"residuals must have shape {(n, n_y)}, got {res.shape}")
    sigma_full = res.T @ res / n
    sigma = np.diag(np.diag(sigma_full))
    gram = np.einsum("kci,kcj->ij", psi, psi) / n
    middle = 2.0 * np.einsum("kci,cd,kdj->ij", psi, sigma, psi) / n
    nb = n_theta_b
    rank_b = _rank(gram[:nb, :nb], rtol)
    rank_a = _rank(gram[nb:, nb:], rtol)
    if rank_b < nb:
        raise SingularGram("baseline block of the Jacobian Gram matrix is rank deficient")
    if strict and rank_a < n_theta - nb:
        raise SingularGram(
            f"learning-component block has rank {rank_a} < {n_theta - nb}"
        )
    gram_pinv = np.linalg.pinv(gram, rcond=rtol, hermitian=True)
    p_hat = gram_pinv @ middle @ gram_pinv
    # the product drifts from symmetry when the Gram matrix is ill conditioned
    p_hat = 0.5 * (p_hat + p_hat.T)
    cross = np.abs(p_hat[:nb, nb:])
    return CovarianceReport(
        p_hat=p_hat,
        n_theta_b=nb,
        max_cross_block=float(cross.max()) if cross.size else 0.0,
        sigma_hat=sigma,
        sigma_full=sigma_full,
        n_samples=n,
        gram_rank=_rank(gram, rtol),
        gram_rank_b=rank_b,
        gram_rank_a=rank_a,
    )


def prediction_jacobians(model: AugmentedModel, states, fact: RegressorFactorization) -> np.ndarray:
    """Per-sample ``d y_hat_k / d theta`` over ``[theta_b; theta_a]``, shape (N, n_y, n_theta).

    For orthogonal models the stacked network Jacobian is projected column by
    column with the dataset projector before being split back per sample.
    """
    n = states.shape[0]
    n_y = model.lag.n_y
    phi_blocks = model.basis.regressor(states)
    jac = jacobian_batch(model.mlp, states)
    if model.structure is Structure.ORTHOGONAL:
        stacked = jac.reshape(n * n_y, -1)
        jac = apply_projector(fact, stacked).reshape(n, n_y, -1)
    return np.concatenate([phi_blocks, jac], axis=2)


def cross_gram(model: AugmentedModel, ds: Dataset) -> np.ndarray:
    """``sum_k phi(x_k)^T J_f(x_k)``, the baseline/learning block of the summed Gram matrix."""
    x, _ = build_states(ds)
    fact = factorize(assemble_phi(model.basis, x))
    psi = prediction_jacobians(model, x, fact)
    nb = model.basis.n_theta_b
    return np.einsum("kci,kcj->ij", psi[:, :, :nb], psi[:, :, nb:])


def estimate_covariance(model: AugmentedModel, ds: Dataset, strict: bool = False) -> CovarianceReport:
    """Asymptotic parameter covariance of a trained, frozen model on ``ds``."""
    x, y = build_states(ds)
    fact = factorize(assemble_phi(model.basis, x))
    psi = prediction_jacobians(model, x, fact)
    residuals = y - predict_test_batch(model, x)
    return sandwich_covariance(psi, residuals, model.basis.n_theta_b, strict=strict)
