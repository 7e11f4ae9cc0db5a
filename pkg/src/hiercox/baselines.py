"""Comparison methods: single-study and pooled penalized Cox fits, and
fixed/random-effects combination of per-study estimates.

Pooled fits keep a separate baseline hazard per study: the pooled partial
log-likelihood is the sum of within-study likelihoods at a shared
coefficient vector, so risk sets never cross study boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import SolverStallError, UndefinedStatisticError, ValidationError
from .selection import CvPlan, mc_split, study_weights, weighted_cstat
from .survival import (
    PreparedStudy,
    StudyData,
    partial_log_lik,
    partial_log_lik_grad,
    partial_log_lik_hessian,
    prepare_study,
)

__all__ = [
    "BaselineFit",
    "fit_single",
    "fit_pooled",
    "meta_combine",
    "ridge_variances",
    "choose_lambda_single",
    "choose_lambda_pooled",
]


@dataclass
class BaselineFit:
    """Fitted comparator: per-study rows for SL/SR, a single vector otherwise."""

    method: str
    coefficients: np.ndarray
    variances: np.ndarray | None = None
    tau2: np.ndarray | None = None
    selected_lambda: object = None


def _as_prepared(studies):
    return [prepare_study(s) if isinstance(s, StudyData) else s for s in studies]


def _ridge_fit(prepared: list[PreparedStudy], lam: float, x0=None, gtol=1e-6, max_iter=1000):
    """Maximize ``sum_k loglik_k(beta) - lam ||beta||^2`` by L-BFGS."""
    p = prepared[0].p

    def objective(b):
        f = lam * float(b @ b)
        g = 2.0 * lam * b
        for prep in prepared:
            f -= partial_log_lik(prep.table, prep.x_sorted, b)
            g -= partial_log_lik_grad(prep.table, prep.x_sorted, b)
        return f, g

    b = np.zeros(p) if x0 is None else np.asarray(x0, dtype=float).copy()
    for _ in range(4):
        res = minimize(
            objective,
            b,
            jac=True,
            method="L-BFGS-B",
            options={"maxcor": 10, "ftol": 0.0, "gtol": 0.5 * gtol, "maxiter": max_iter},
        )
        b = res.x
        if float(np.abs(objective(b)[1]).max()) <= gtol:
            return b
    raise SolverStallError("ridge fit stalled above gradient tolerance", last_iterate=b)


def _lasso_fit(prepared: list[PreparedStudy], lam: float, x0=None, tol=1e-8, max_iter=5000):
    """Proximal gradient (soft-threshold steps, backtracking) on the summed likelihood."""
    p = prepared[0].p

    def neg_loglik(b):
        return -sum(partial_log_lik(pr.table, pr.x_sorted, b) for pr in prepared)

    def neg_grad(b):
        g = np.zeros(p)
        for pr in prepared:
            g -= partial_log_lik_grad(pr.table, pr.x_sorted, b)
        return g

    b = np.zeros(p) if x0 is None else np.asarray(x0, dtype=float).copy()
    step = 1.0
    f = neg_loglik(b)
    for _ in range(max_iter):
        g = neg_grad(b)
        # Backtrack until the smooth quadratic model upper-bounds the likelihood.
        while True:
            cand = np.sign(b - step * g) * np.maximum(np.abs(b - step * g) - step * lam, 0.0)
            diff = cand - b
            f_cand = neg_loglik(cand)
            if f_cand <= f + float(g @ diff) + float(diff @ diff) / (2.0 * step) + 1e-12:
                break
            step *= 0.5
            if step < 1e-14:
                raise SolverStallError("lasso line search collapsed", last_iterate=b)
        move = float(np.abs(diff).max())
        b = cand
        f = f_cand
        if move <= tol * max(1.0, float(np.abs(b).max())):
            return b
        step *= 1.25
    raise SolverStallError("lasso proximal gradient hit its iteration cap", last_iterate=b)


def fit_single(study: StudyData, penalty: str, lam: float, x0=None) -> np.ndarray:
    """Penalized Cox fit on one study; ``penalty`` is ``"lasso"`` or ``"ridge"``."""
    prepared = _as_prepared([study])
    if penalty == "ridge":
        return _ridge_fit(prepared, lam, x0=x0)
    if penalty == "lasso":
        return _lasso_fit(prepared, lam, x0=x0)
    raise ValidationError(f"unknown penalty {penalty!r}")


def fit_pooled(studies: list[StudyData], penalty: str, lam: float, x0=None) -> np.ndarray:
    """Shared-coefficient fit across studies with study-stratified risk sets."""
    prepared = _as_prepared(studies)
    if len({pr.p for pr in prepared}) != 1:
        raise ValidationError("pooled studies must share the covariate dimension")
    if penalty == "ridge":
        return _ridge_fit(prepared, lam, x0=x0)
    if penalty == "lasso":
        return _lasso_fit(prepared, lam, x0=x0)
    raise ValidationError(f"unknown penalty {penalty!r}")


def ridge_variances(study: StudyData, beta: np.ndarray, lam: float) -> np.ndarray:
    """Per-coefficient variances from the inverse Hessian of the penalized likelihood."""
    prep = prepare_study(study) if isinstance(study, StudyData) else study
    hess = -partial_log_lik_hessian(prep.table, prep.x_sorted, beta)
    hess[np.diag_indices_from(hess)] += 2.0 * lam
    cov = np.linalg.inv(hess)
    return np.maximum(np.diag(cov), 1e-12)


def meta_combine(
    estimates: np.ndarray, variances: np.ndarray, mode: str
) -> tuple[np.ndarray, np.ndarray]:
    """Combine K per-study estimates per coefficient.

    FE uses inverse-variance weights; RE first adds the DerSimonian-Laird
    between-study variance ``tau^2`` to every study variance.

    Returns
    -------
    combined, tau2:
        The combined p-vector and the per-coefficient tau^2 (zeros for FE).
    """
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    variances = np.atleast_2d(np.asarray(variances, dtype=float))
    if estimates.shape != variances.shape:
        raise ValidationError("estimates and variances must have matching shapes")
    if np.any(variances <= 0):
        raise ValidationError("variances must be strictly positive")
    if mode not in ("FE", "RE"):
        raise ValidationError(f"mode must be 'FE' or 'RE', got {mode!r}")

    K = estimates.shape[0]
    w = 1.0 / variances
    w_sum = w.sum(axis=0)
    fe = (w * estimates).sum(axis=0) / w_sum
    tau2 = np.zeros(estimates.shape[1])
    if mode == "FE" or K < 2:
        return fe, tau2

    q = (w * (estimates - fe) ** 2).sum(axis=0)
    denom = w_sum - (w**2).sum(axis=0) / w_sum
    with np.errstate(invalid="ignore", divide="ignore"):
        tau2 = np.maximum((q - (K - 1)) / denom, 0.0)
    tau2 = np.where(denom > 0, tau2, 0.0)
    w_re = 1.0 / (variances + tau2)
    combined = (w_re * estimates).sum(axis=0) / w_re.sum(axis=0)
    return combined, tau2


def choose_lambda_single(
    study: StudyData, penalty: str, grid, plan: CvPlan
) -> tuple[np.ndarray, float]:
    """Monte-Carlo CV over ``grid`` for one study; returns (coefficients, lambda)."""
    return _choose_lambda([study], penalty, grid, plan)


def choose_lambda_pooled(
    studies: list[StudyData], penalty: str, grid, plan: CvPlan
) -> tuple[np.ndarray, float]:
    """Monte-Carlo CV over ``grid`` for the pooled fit; returns (coefficients, lambda)."""
    return _choose_lambda(studies, penalty, grid, plan)


def _choose_lambda(studies, penalty, grid, plan):
    grid = [float(g) for g in grid]
    if not grid:
        raise ValidationError("lambda grid must be non-empty")
    scores = np.full((len(grid), plan.n_splits), np.nan)
    for m in range(plan.n_splits):
        train, val = mc_split(studies, plan, m)
        weights = study_weights(val)
        warm = None
        for gi in np.argsort(grid)[::-1]:
            lam = grid[gi]
            try:
                coef = fit_pooled(train, penalty, lam, x0=warm)
                warm = coef
                rows = np.tile(coef, (len(val), 1))
                scores[gi, m] = weighted_cstat(rows, val, weights)
            except (SolverStallError, UndefinedStatisticError):
                continue
    mean = np.nanmean(scores, axis=1)
    if np.all(np.isnan(mean)):
        raise SolverStallError("baseline CV failed at every lambda")
    best = int(np.nanargmax(mean))
    lam = grid[best]
    coef = fit_pooled(studies, penalty, lam)
    return coef, lam
