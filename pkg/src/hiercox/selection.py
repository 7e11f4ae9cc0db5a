"""Monte-Carlo cross-validation over the (lambda0, lambda1) grid.

Data are split M times per study into stratified train/validation halves
(identical splits across grid points); candidate bundles are scored with a
weighted sum of per-study concordances and the best grid point is refit on
the full data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .admm import ConvergenceReport, SolverOptions, fit
from .errors import (
    GridSearchError,
    NumericalFailureError,
    SolverStallError,
    UndefinedStatisticError,
    ValidationError,
)
from .penalties import PenaltyConfig, SimilarityMatrix
from .survival import StudyData, concordance

__all__ = [
    "CvPlan",
    "CvResult",
    "default_grid",
    "mc_split",
    "study_weights",
    "weighted_cstat",
    "grid_search",
]


def default_grid(lambda0_values=None, lambda1_values=None) -> list[tuple[float, float]]:
    """Full cross of the default lambda grids."""
    if lambda0_values is None:
        lambda0_values = np.concatenate([[0.0], np.logspace(-3, 1, 7)])
    if lambda1_values is None:
        lambda1_values = np.logspace(-3, 2, 8)
    return [(float(l0), float(l1)) for l0 in lambda0_values for l1 in lambda1_values]


@dataclass
class CvPlan:
    """Split count, split geometry, the lambda grid, and scoring weights.

    ``weights=None`` means per-split weights ``1/sqrt(m_k)`` computed from the
    validation half's unique-event count of each study.
    """

    n_splits: int = 20
    train_fraction: float = 0.8
    grid: list[tuple[float, float]] = field(default_factory=default_grid)
    weights: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_splits < 1:
            raise ValidationError("n_splits must be at least 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must lie in (0, 1)")
        if not self.grid:
            raise ValidationError("lambda grid must be non-empty")
        if self.weights is not None and np.any(np.asarray(self.weights) < 0):
            raise ValidationError("study weights must be non-negative")


@dataclass
class CvResult:
    grid: list[tuple[float, float]]
    mean_scores: np.ndarray
    split_scores: np.ndarray
    study_scores: np.ndarray
    weights: np.ndarray
    selected: tuple[float, float]
    bundle: np.ndarray
    report: ConvergenceReport
    sigma: SimilarityMatrix


def _split_study(study: StudyData, train_fraction: float, rng) -> tuple[StudyData, StudyData]:
    """Stratified split: events and censored rows are partitioned separately."""
    n = study.n
    events = np.flatnonzero(study.status == 1)
    censored = np.flatnonzero(study.status == 0)
    if events.size < 2:
        raise ValidationError(
            f"study {study.study_id!r} has {events.size} events; train and "
            "validation halves each need at least one"
        )
    target_train = int(round(train_fraction * n))
    n_train_events = int(np.clip(round(train_fraction * events.size), 1, events.size - 1))
    n_train_cens = int(np.clip(target_train - n_train_events, 0, censored.size))

    events = rng.permutation(events)
    censored = rng.permutation(censored)
    train_idx = np.sort(np.concatenate([events[:n_train_events], censored[:n_train_cens]]))
    val_idx = np.sort(np.concatenate([events[n_train_events:], censored[n_train_cens:]]))

    def subset(idx):
        return StudyData(
            study_id=study.study_id,
            times=study.times[idx],
            status=study.status[idx],
            covariates=study.covariates[idx],
        )

    return subset(train_idx), subset(val_idx)


def mc_split(
    studies: list[StudyData], plan: CvPlan, split_index: int
) -> tuple[list[StudyData], list[StudyData]]:
    """Deterministic stratified train/validation split for one Monte-Carlo draw."""
    train, val = [], []
    for k, study in enumerate(studies):
        rng = np.random.default_rng([plan.seed, split_index, k])
        tr, va = _split_study(study, plan.train_fraction, rng)
        train.append(tr)
        val.append(va)
    return train, val


def study_weights(validation: list[StudyData]) -> np.ndarray:
    """``1/sqrt(m_k)`` from each validation half's unique observed event times."""
    m = np.array(
        [np.unique(s.times[s.status == 1]).size for s in validation], dtype=float
    )
    return 1.0 / np.sqrt(m)


def weighted_cstat(
    per_study_coefs: np.ndarray, validation: list[StudyData], weights: np.ndarray
) -> float:
    """Weighted mean of per-study concordances, each study scored with its own row.

    Weights are normalized to sum to one so the value stays in [0, 1].
    """
    per_study_coefs = np.atleast_2d(np.asarray(per_study_coefs, dtype=float))
    weights = np.asarray(weights, dtype=float)
    if per_study_coefs.shape[0] != len(validation) or weights.shape[0] != len(validation):
        raise ValidationError("one coefficient row and one weight per validation study")
    total = float(weights.sum())
    if total <= 0:
        raise ValidationError("weights must not all be zero")
    value = 0.0
    for k, study in enumerate(validation):
        scores = study.covariates @ per_study_coefs[k]
        value += weights[k] * concordance(scores, study.times, study.status)
    return value / total


def _warm_start_order(grid: list[tuple[float, float]]) -> list[int]:
    # Strongest penalties first: their sparse/fused solutions are cheap and
    # seed the rest of the path.
    return sorted(range(len(grid)), key=lambda g: (-grid[g][0], -grid[g][1]))


def grid_search(
    studies: list[StudyData],
    sigma: SimilarityMatrix,
    plan: CvPlan,
    *,
    a: int = 2,
    solver_opts: SolverOptions | None = None,
) -> CvResult:
    """Score every grid point on every split, select, and refit on all data.

    Fits along the grid are warm-started from the previous grid point of the
    same split.  A fit failure invalidates its grid point; if every point
    fails a :class:`GridSearchError` is raised.
    """
    solver_opts = solver_opts or SolverOptions()
    K = len(studies)
    G = len(plan.grid)
    M = plan.n_splits

    splits = [mc_split(studies, plan, m) for m in range(M)]
    weights = np.empty((M, K))
    for m, (_, val) in enumerate(splits):
        weights[m] = plan.weights if plan.weights is not None else study_weights(val)

    split_scores = np.full((G, M), np.nan)
    study_scores = np.full((G, M, K), np.nan)
    valid = np.ones(G, dtype=bool)

    order = _warm_start_order(plan.grid)
    for m, (train, val) in enumerate(splits):
        warm = None
        for g in order:
            if not valid[g]:
                continue
            lam0, lam1 = plan.grid[g]
            cfg = PenaltyConfig(lambda0=lam0, lambda1=lam1, a=a, sigma=sigma)
            opts = SolverOptions(
                rho=solver_opts.rho,
                epsilon=solver_opts.epsilon,
                max_iter=solver_opts.max_iter,
                inner_tol=solver_opts.inner_tol,
                inner_max_iter=solver_opts.inner_max_iter,
                adapt_rho=solver_opts.adapt_rho,
                warm_start=warm,
                track_objective=False,
            )
            try:
                bundle, _ = fit(train, cfg, opts)
            except (SolverStallError, NumericalFailureError):
                valid[g] = False
                continue
            warm = bundle
            try:
                split_scores[g, m] = weighted_cstat(bundle[1:], val, weights[m])
                for k in range(K):
                    scores = val[k].covariates @ bundle[k + 1]
                    study_scores[g, m, k] = concordance(
                        scores, val[k].times, val[k].status
                    )
            except UndefinedStatisticError:
                valid[g] = False

    if not valid.any():
        raise GridSearchError("every (lambda0, lambda1) grid point failed")

    mean_scores = np.where(valid, np.nanmean(split_scores, axis=1), -np.inf)
    best = max(
        range(G),
        key=lambda g: (mean_scores[g], -plan.grid[g][0], -plan.grid[g][1]),
    )
    lam0, lam1 = plan.grid[best]

    cfg = PenaltyConfig(lambda0=lam0, lambda1=lam1, a=a, sigma=sigma)
    bundle, report = fit(studies, cfg, SolverOptions(
        rho=solver_opts.rho,
        epsilon=solver_opts.epsilon,
        max_iter=solver_opts.max_iter,
        inner_tol=solver_opts.inner_tol,
        inner_max_iter=solver_opts.inner_max_iter,
        adapt_rho=solver_opts.adapt_rho,
    ))
    return CvResult(
        grid=list(plan.grid),
        mean_scores=mean_scores,
        split_scores=split_scores,
        study_scores=study_scores,
        weights=weights,
        selected=(lam0, lam1),
        bundle=bundle,
        report=report,
        sigma=sigma,
    )
