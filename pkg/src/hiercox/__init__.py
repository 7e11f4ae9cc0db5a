"""Multi-study Cox models with similarity-weighted hierarchical shrinkage.

The package fits study-specific proportional-hazards coefficients that are
shrunk toward a shared, elastic-net-regularized center, with the amount of
cross-study borrowing controlled by a K x K similarity matrix that can be
estimated from the data.  It ships the consensus ADMM solver, the similarity
estimator, Monte-Carlo cross-validation, six comparison baselines, a
simulation engine, and a CLI.
"""

from .admm import ConvergenceReport, SolverOptions, SolverState, fit, soft_threshold
from .baselines import BaselineFit, fit_pooled, fit_single, meta_combine
from .errors import (
    GridSearchError,
    NumericalFailureError,
    SolverStallError,
    UndefinedStatisticError,
    ValidationError,
)
from .penalties import (
    PenaltyConfig,
    SimilarityMatrix,
    elastic_net_value,
    full_objective,
    fusion_penalty_value,
)
from .selection import CvPlan, CvResult, grid_search, mc_split, weighted_cstat
from .similarity import SimilarityEstimate, SimilarityOptions, estimate_sigma
from .simgen import SimScenario, SimulatedCollection, gen_collection
from .survival import (
    EventTable,
    StudyData,
    build_event_table,
    concordance,
    partial_log_lik,
    partial_log_lik_grad,
    prepare_study,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineFit",
    "ConvergenceReport",
    "CvPlan",
    "CvResult",
    "EventTable",
    "GridSearchError",
    "NumericalFailureError",
    "PenaltyConfig",
    "SimScenario",
    "SimilarityEstimate",
    "SimilarityMatrix",
    "SimilarityOptions",
    "SimulatedCollection",
    "SolverOptions",
    "SolverStallError",
    "SolverState",
    "StudyData",
    "UndefinedStatisticError",
    "ValidationError",
    "build_event_table",
    "concordance",
    "elastic_net_value",
    "estimate_sigma",
    "fit",
    "fit_pooled",
    "fit_single",
    "full_objective",
    "fusion_penalty_value",
    "gen_collection",
    "grid_search",
    "mc_split",
    "meta_combine",
    "partial_log_lik",
    "partial_log_lik_grad",
    "prepare_study",
    "soft_threshold",
    "weighted_cstat",
]
