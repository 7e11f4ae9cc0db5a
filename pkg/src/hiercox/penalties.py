"""Penalty terms and the full regularized multi-study objective.

The objective being maximized is

    sum_k loglik(beta_k) - R0(beta_0) - R1(beta)

where R0 is an elastic net on the shared center beta_0 and R1 sums, over
covariates, the similarity-weighted norm of the study deviations from the
center, raised to the exponent ``a``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import ValidationError
from .survival import PreparedStudy, partial_log_lik

__all__ = [
    "SimilarityMatrix",
    "PenaltyConfig",
    "elastic_net_value",
    "fusion_penalty_value",
    "full_objective",
]

_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class SimilarityMatrix:
    """Symmetric positive-definite K x K matrix weighting cross-study shrinkage.

    Inverse applications go through a cached Cholesky factor; the explicit
    inverse is never formed.
    """

    values: np.ndarray
    cho_factor: np.ndarray = field(repr=False)
    min_eigenvalue: float

    @classmethod
    def from_values(cls, values) -> "SimilarityMatrix":
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValidationError("similarity matrix must be square")
        scale = max(1.0, float(np.abs(values).max()))
        if np.abs(values - values.T).max() > _SYMMETRY_TOL * scale:
            raise ValidationError("similarity matrix is not symmetric")
        values = 0.5 * (values + values.T)
        eigvals = np.linalg.eigvalsh(values)
        if eigvals[0] <= 0:
            raise ValidationError(
                f"similarity matrix is not positive-definite (min eigenvalue {eigvals[0]:.3e})"
            )
        factor = np.linalg.cholesky(values)
        return cls(values=values, cho_factor=factor, min_eigenvalue=float(eigvals[0]))

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Apply the inverse to a vector or to each column of a matrix."""
        y = linalg.solve_triangular(self.cho_factor, b, lower=True)
        return linalg.solve_triangular(self.cho_factor.T, y, lower=False)

    def quad_form(self, v: np.ndarray) -> np.ndarray:
        """``v' Sigma^{-1} v`` per column of ``v`` (columnwise for matrices)."""
        y = linalg.solve_triangular(self.cho_factor, v, lower=True)
        return np.sum(np.square(y), axis=0)

    def norm(self, v: np.ndarray) -> float:
        """The similarity norm ``sqrt(v' Sigma^{-1} v)`` of one vector."""
        return float(np.sqrt(self.quad_form(np.asarray(v, dtype=float).reshape(self.dim))))

    def scaled(self, factor: float) -> "SimilarityMatrix":
        if factor <= 0:
            raise ValidationError("scale factor must be positive")
        return SimilarityMatrix.from_values(self.values * factor)

    def permuted(self, order) -> "SimilarityMatrix":
        order = np.asarray(order, dtype=int)
        return SimilarityMatrix.from_values(self.values[np.ix_(order, order)])


@dataclass(frozen=True)
class PenaltyConfig:
    """Hyperparameters of the regularized objective."""

    lambda0: float
    lambda1: float
    a: int
    sigma: SimilarityMatrix

    def __post_init__(self):
        if self.lambda0 < 0 or self.lambda1 < 0:
            raise ValidationError("penalty weights must be non-negative")
        if self.a not in (1, 2):
            raise ValidationError(f"fusion exponent must be 1 or 2, got {self.a}")


def elastic_net_value(beta0: np.ndarray, cfg: PenaltyConfig) -> float:
    """``lambda0 * ||beta0||_1 + lambda1 * ||beta0||_2^2``."""
    beta0 = np.asarray(beta0, dtype=float).ravel()
    return float(cfg.lambda0 * np.abs(beta0).sum() + cfg.lambda1 * np.square(beta0).sum())


def fusion_penalty_value(beta: np.ndarray, cfg: PenaltyConfig) -> float:
    """Sum over covariates of the similarity norm of study deviations, to the power ``a``.

    ``beta`` is the (K+1) x p bundle with the center in row 0.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 2 or beta.shape[0] != cfg.sigma.dim + 1:
        raise ValidationError(
            f"coefficient bundle must have {cfg.sigma.dim + 1} rows, got {beta.shape}"
        )
    deviations = beta[1:] - beta[0]
    quad = np.maximum(cfg.sigma.quad_form(deviations), 0.0)
    if cfg.a == 2:
        return float(quad.sum())
    return float(np.sqrt(quad).sum())


def full_objective(
    beta: np.ndarray, prepared: list[PreparedStudy], cfg: PenaltyConfig
) -> float:
    """The regularized log partial likelihood of the whole bundle."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape[0] != len(prepared) + 1:
        raise ValidationError(
            f"bundle has {beta.shape[0]} rows for {len(prepared)} studies"
        )
    total = 0.0
    for k, prep in enumerate(prepared):
        total += partial_log_lik(prep.table, prep.x_sorted, beta[k + 1])
    return total - elastic_net_value(beta[0], cfg) - fusion_penalty_value(beta, cfg)
