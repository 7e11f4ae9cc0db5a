"""Data-driven estimation of the cross-study similarity matrix.

The pipeline: fit one ridge Cox model per study, regress each study's
outcomes on the K-1 risk scores built from the *other* studies' ridge
estimates, project every coefficient vector through the fitted weights, and
take the (uncentered) empirical covariance of the projections.  A small
diagonal jitter guarantees positive-definiteness for the solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import fit_single
from .errors import UndefinedStatisticError, ValidationError
from .penalties import SimilarityMatrix
from .survival import StudyData, concordance

__all__ = [
    "SimilarityOptions",
    "SimilarityEstimate",
    "initial_ridge_fits",
    "choose_ridge_lambda",
    "estimate_alpha",
    "estimate_sigma",
]

DEFAULT_RIDGE_GRID = tuple(np.logspace(-2, 2, 5))


@dataclass
class SimilarityOptions:
    """Controls for the estimation pipeline."""

    ridge_lambdas: np.ndarray | None = None
    ridge_grid: tuple = DEFAULT_RIDGE_GRID
    cv_folds: int = 5
    alpha_ridge: float = 1e-6
    jitter_scale: float = 1e-6
    seed: int = 0


@dataclass
class SimilarityEstimate:
    sigma: SimilarityMatrix
    alpha: np.ndarray
    initial_betas: np.ndarray
    projected_betas: np.ndarray
    ridge_lambdas: np.ndarray
    raw_sigma: np.ndarray = field(repr=False, default=None)
    jitter: float = 0.0


def choose_ridge_lambda(
    study: StudyData, grid=DEFAULT_RIDGE_GRID, folds: int = 5, seed: int = 0
) -> float:
    """Pick the ridge weight by stratified K-fold CV on the study's concordance."""
    grid = [float(g) for g in grid]
    rng = np.random.default_rng([seed, 7, 0])
    events = rng.permutation(np.flatnonzero(study.status == 1))
    censored = rng.permutation(np.flatnonzero(study.status == 0))
    folds = int(min(folds, events.size))
    if folds < 2:
        return float(np.median(grid))

    assignments = np.empty(study.n, dtype=int)
    assignments[events] = np.arange(events.size) % folds
    assignments[censored] = np.arange(censored.size) % folds

    scores = np.full((len(grid), folds), np.nan)
    for f in range(folds):
        train_idx = np.flatnonzero(assignments != f)
        val_idx = np.flatnonzero(assignments == f)
        train = StudyData(
            study_id=study.study_id,
            times=study.times[train_idx],
            status=study.status[train_idx],
            covariates=study.covariates[train_idx],
        )
        warm = None
        for gi in np.argsort(grid)[::-1]:
            beta = fit_single(train, "ridge", grid[gi], x0=warm)
            warm = beta
            try:
                scores[gi, f] = concordance(
                    study.covariates[val_idx] @ beta,
                    study.times[val_idx],
                    study.status[val_idx],
                )
            except UndefinedStatisticError:
                continue
    mean = np.nanmean(scores, axis=1)
    if np.all(np.isnan(mean)):
        return float(np.median(grid))
    return grid[int(np.nanargmax(mean))]


def initial_ridge_fits(studies: list[StudyData], ridge_lambdas) -> np.ndarray:
    """One ridge Cox estimate per study, stacked as a K x p matrix."""
    ridge_lambdas = np.asarray(ridge_lambdas, dtype=float).ravel()
    if ridge_lambdas.shape[0] != len(studies):
        raise ValidationError("one ridge lambda per study is required")
    return np.vstack(
        [fit_single(s, "ridge", lam) for s, lam in zip(studies, ridge_lambdas)]
    )


def estimate_alpha(
    k: int, studies: list[StudyData], initial_betas: np.ndarray, alpha_ridge: float = 1e-6
) -> np.ndarray:
    """Weights of study k's outcomes on the other studies' risk scores.

    Fits a Cox model on study k whose K-1 covariates are ``X_k beta_hat_{k'}``
    for ``k' != k``, stabilized with a tiny ridge so near-duplicate studies
    (collinear risk scores) stay solvable.
    """
    K = len(studies)
    if K < 2:
        raise ValidationError("alpha weights need at least two studies")
    others = [j for j in range(K) if j != k]
    study = studies[k]
    risk_scores = study.covariates @ initial_betas[others].T
    score_study = StudyData(
        study_id=f"{study.study_id}:risk-scores",
        times=study.times,
        status=study.status,
        covariates=risk_scores,
    )
    return fit_single(score_study, "ridge", alpha_ridge)


def estimate_sigma(
    studies: list[StudyData], opts: SimilarityOptions | None = None
) -> SimilarityEstimate:
    """Estimate the K x K similarity matrix from a collection of studies."""
    opts = opts or SimilarityOptions()
    K = len(studies)
    if K < 2:
        raise ValidationError("similarity estimation needs at least two studies")

    if opts.ridge_lambdas is not None:
        lambdas = np.asarray(opts.ridge_lambdas, dtype=float).ravel()
    else:
        lambdas = np.array(
            [
                choose_ridge_lambda(s, opts.ridge_grid, opts.cv_folds, opts.seed)
                for s in studies
            ]
        )
    initial = initial_ridge_fits(studies, lambdas)

    alpha = np.zeros((K, K - 1))
    projected = np.zeros_like(initial)
    for k in range(K):
        alpha[k] = estimate_alpha(k, studies, initial, opts.alpha_ridge)
        others = [j for j in range(K) if j != k]
        projected[k] = alpha[k] @ initial[others]

    p = initial.shape[1]
    raw = (projected @ projected.T) / p
    raw = 0.5 * (raw + raw.T)

    eigvals = np.linalg.eigvalsh(raw)
    target = opts.jitter_scale * np.trace(raw) / K
    if target <= 0:
        # Degenerate all-zero projections; fall back to a scaled identity.
        target = opts.jitter_scale
    jitter = max(0.0, target - eigvals[0])
    sigma = SimilarityMatrix.from_values(raw + jitter * np.eye(K))
    return SimilarityEstimate(
        sigma=sigma,
        alpha=alpha,
        initial_betas=initial,
        projected_betas=projected,
        ridge_lambdas=lambdas,
        raw_sigma=raw,
        jitter=jitter,
    )
