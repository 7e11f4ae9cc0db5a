"""Synthetic multi-study survival collections.

Scenario geometry: a block-diagonal true similarity matrix with three, two,
or one cluster of studies; a sparse-or-dense shared coefficient vector with
per-study deviations drawn jointly across studies; AR(1) covariates; and
proportional-hazards event times with exponential censoring.  Covariate
matrices and sample sizes are keyed only on the scenario seed, so they stay
identical across replicates while coefficients and outcomes are redrawn.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import integrate, optimize

from .errors import ValidationError
from .penalties import SimilarityMatrix
from .survival import StudyData

__all__ = [
    "BaselineSpec",
    "CensoringSpec",
    "SimScenario",
    "SimulatedCollection",
    "block_sigma",
    "cluster_sizes",
    "cluster_labels",
    "fit_study_indices",
    "gen_coefficients",
    "gen_covariates",
    "gen_survival",
    "gen_collection",
    "affine_transform",
]

# Stream tags keep the per-purpose RNG substreams disjoint.
_STREAM_SIZES = 11
_STREAM_COVARIATES = 22
_STREAM_COEFFICIENTS = 33
_STREAM_OUTCOMES = 44
_STREAM_EVAL_COVARIATES = 55
_STREAM_EVAL_OUTCOMES = 66


@dataclass(frozen=True)
class BaselineSpec:
    """Weibull baseline survival, parameterized by shape and median event time."""

    shape: float = 1.2
    median: float = 3.0

    @property
    def scale(self) -> float:
        return self.median / math.log(2.0) ** (1.0 / self.shape)

    def survival(self, t):
        return np.exp(-((np.asarray(t, dtype=float) / self.scale) ** self.shape))

    def inverse_survival(self, s):
        return self.scale * (-np.log(np.asarray(s, dtype=float))) ** (1.0 / self.shape)


@dataclass(frozen=True)
class CensoringSpec:
    """Exponential censoring; either a fixed rate or a target censoring fraction."""

    rate: float | None = None
    target_fraction: float = 0.3

    def resolved_rate(self, baseline: BaselineSpec) -> float:
        if self.rate is not None:
            return float(self.rate)
        return _calibrate_censoring_rate(baseline, self.target_fraction)


@functools.lru_cache(maxsize=64)
def _calibrate_censoring_rate(baseline: BaselineSpec, fraction: float) -> float:
    """Rate such that, at zero covariate effect, P(censoring precedes event) = fraction."""
    if not 0.0 < fraction < 1.0:
        raise ValidationError("target censoring fraction must lie in (0, 1)")

    def censored_probability(rate):
        # P(C < T) = 1 - E[exp(-rate * T)] for exponential C independent of T.
        val, _ = integrate.quad(
            lambda u: np.exp(-rate * baseline.inverse_survival(u)), 0.0, 1.0, limit=200
        )
        return 1.0 - val

    lo, hi = 1e-9, 1.0
    while censored_probability(hi) < fraction:
        hi *= 4.0
        if hi > 1e9:
            raise ValidationError("censoring calibration failed to bracket the target")
    return float(optimize.brentq(lambda r: censored_probability(r) - fraction, lo, hi, rtol=1e-10))


@dataclass
class SimScenario:
    """Full description of one simulated collection."""

    K_total: int = 18
    K_fit: int = 5
    p: int = 500
    p0: float = 0.9
    sigma_scenario: int = 1
    n_range: tuple[int, int] = (100, 500)
    holdout_per_study: int = 1000
    coef_variance: float = 0.1
    ar_decay: float = 0.3
    sigma_diag: float = 0.05
    sigma_within: float = 0.04
    baseline: BaselineSpec = field(default_factory=BaselineSpec)
    censoring: CensoringSpec = field(default_factory=CensoringSpec)
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.K_fit <= self.K_total:
            raise ValidationError("K_fit must lie in [1, K_total]")
        if not 0.0 <= self.p0 <= 1.0:
            raise ValidationError("p0 must lie in [0, 1]")
        if not -1.0 < self.ar_decay < 1.0:
            raise ValidationError("ar_decay must lie in (-1, 1)")
        if self.sigma_scenario not in (1, 2, 3):
            raise ValidationError("sigma_scenario must be 1, 2, or 3")

    def to_json(self) -> str:
        d = asdict(self)
        d["n_range"] = list(self.n_range)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SimScenario":
        d = json.loads(text)
        if "baseline" in d:
            d["baseline"] = BaselineSpec(**d["baseline"])
        if "censoring" in d:
            d["censoring"] = CensoringSpec(**d["censoring"])
        if "n_range" in d:
            d["n_range"] = tuple(d["n_range"])
        return cls(**d)


@dataclass
class SimulatedCollection:
    fit_studies: list[StudyData]
    holdout_studies: list[StudyData]
    eval_sets: dict[str, StudyData]
    coefficients: np.ndarray
    sigma_true: SimilarityMatrix
    fit_indices: np.ndarray
    holdout_indices: np.ndarray


def cluster_sizes(scenario_id: int, K_total: int) -> list[int]:
    """Near-equal block sizes for 3, 2, or 1 clusters of studies."""
    n_clusters = {1: 3, 2: 2, 3: 1}[scenario_id]
    return [len(part) for part in np.array_split(np.arange(K_total), n_clusters)]


def cluster_labels(scenario_id: int, K_total: int) -> np.ndarray:
    sizes = cluster_sizes(scenario_id, K_total)
    return np.repeat(np.arange(len(sizes)), sizes)


def block_sigma(
    scenario_id: int, K_total: int, diag: float = 0.05, within: float = 0.04
) -> SimilarityMatrix:
    """Block-diagonal similarity matrix with the scenario's cluster count."""
    if not 0.0 <= within < diag:
        raise ValidationError("within-cluster covariance must satisfy 0 <= within < diag")
    labels = cluster_labels(scenario_id, K_total)
    values = np.where(labels[:, None] == labels[None, :], within, 0.0)
    np.fill_diagonal(values, diag)
    return SimilarityMatrix.from_values(values)


# Nested fit-study sets for the 18-study design: K=10 uses studies 1-4 and
# 10-15 (1-indexed), K=2/5 stay inside the first two clusters, K=15 leaves
# the last three studies of the third cluster held out.
_FIT_SETS_18 = {
    2: [0, 9],
    5: [0, 1, 2, 9, 10],
    10: [0, 1, 2, 3, 9, 10, 11, 12, 13, 14],
    15: list(range(15)),
}


def fit_study_indices(K_total: int, K_fit: int, scenario_id: int) -> np.ndarray:
    """Which studies are used for fitting; the rest are held out."""
    if K_total == 18 and K_fit in _FIT_SETS_18:
        return np.array(_FIT_SETS_18[K_fit], dtype=int)
    # General rule: round-robin over clusters so every prefix spans clusters.
    labels = cluster_labels(scenario_id, K_total)
    order = np.lexsort((np.arange(K_total), _position_in_cluster(labels)))
    return np.sort(order[:K_fit])


def _position_in_cluster(labels: np.ndarray) -> np.ndarray:
    pos = np.zeros_like(labels)
    counts: dict[int, int] = {}
    for i, lab in enumerate(labels):
        counts[lab] = counts.get(lab, 0)
        pos[i] = counts[lab]
        counts[lab] += 1
    return pos


def gen_coefficients(scenario: SimScenario, rng) -> np.ndarray:
    """Center row from the zero/normal mixture plus jointly drawn study deviations."""
    p = scenario.p
    K = scenario.K_total
    sigma = block_sigma(
        scenario.sigma_scenario, K, scenario.sigma_diag, scenario.sigma_within
    )
    beta0 = rng.normal(0.0, math.sqrt(scenario.coef_variance), size=p)
    beta0[rng.random(p) < scenario.p0] = 0.0
    # One K-vector of deviations per covariate, correlated across studies.
    eps = sigma.cho_factor @ rng.standard_normal((K, p))
    return np.vstack([beta0, beta0 + eps])


def gen_covariates(n: int, p: int, ar_decay: float, rng) -> np.ndarray:
    """Rows from N(0, V) with V[j,j'] = ar_decay^|j-j'| via the AR(1) recursion."""
    e = rng.standard_normal((n, p))
    x = np.empty((n, p))
    x[:, 0] = e[:, 0]
    scale = math.sqrt(1.0 - ar_decay**2)
    for j in range(1, p):
        x[:, j] = ar_decay * x[:, j - 1] + scale * e[:, j]
    return x


def gen_survival(
    covariates: np.ndarray,
    beta: np.ndarray,
    baseline: BaselineSpec,
    censoring: CensoringSpec,
    rng,
) -> tuple[np.ndarray, np.ndarray]:
    """Inverse-transform sampling from S0(t)^exp(x'beta), censored exponentially."""
    theta = np.exp(covariates @ beta)
    u = rng.random(covariates.shape[0])
    # S0(T)^theta = U  =>  T = S0^{-1}(U^(1/theta)); computed in log space.
    event_times = baseline.scale * (-np.log(u) / theta) ** (1.0 / baseline.shape)
    event_times = np.maximum(event_times, 1e-12)
    rate = censoring.resolved_rate(baseline)
    censor_times = rng.exponential(1.0 / rate, size=covariates.shape[0])
    times = np.minimum(event_times, censor_times)
    status = (event_times <= censor_times).astype(int)
    return times, status


def _study_id(index: int) -> str:
    return f"study-{index + 1:02d}"


def gen_collection(scenario: SimScenario, replicate: int = 0) -> SimulatedCollection:
    """One full replication bundle: fit studies, holdouts, evaluation sets, truth."""
    seed = scenario.seed
    K = scenario.K_total

    sizes_rng = np.random.default_rng([seed, _STREAM_SIZES])
    n_lo, n_hi = scenario.n_range
    sizes = sizes_rng.integers(n_lo, n_hi + 1, size=K)

    coef_rng = np.random.default_rng([seed, _STREAM_COEFFICIENTS, replicate])
    coefficients = gen_coefficients(scenario, coef_rng)
    sigma_true = block_sigma(
        scenario.sigma_scenario, K, scenario.sigma_diag, scenario.sigma_within
    )

    studies = []
    eval_sets = {}
    for k in range(K):
        x_rng = np.random.default_rng([seed, _STREAM_COVARIATES, k])
        x = gen_covariates(int(sizes[k]), scenario.p, scenario.ar_decay, x_rng)
        o_rng = np.random.default_rng([seed, _STREAM_OUTCOMES, replicate, k])
        times, status = gen_survival(
            x, coefficients[k + 1], scenario.baseline, scenario.censoring, o_rng
        )
        studies.append(
            StudyData(study_id=_study_id(k), times=times, status=status, covariates=x)
        )

        ex_rng = np.random.default_rng([seed, _STREAM_EVAL_COVARIATES, k])
        ex = gen_covariates(
            scenario.holdout_per_study, scenario.p, scenario.ar_decay, ex_rng
        )
        eo_rng = np.random.default_rng([seed, _STREAM_EVAL_OUTCOMES, replicate, k])
        etimes, estatus = gen_survival(
            ex, coefficients[k + 1], scenario.baseline, scenario.censoring, eo_rng
        )
        eval_sets[_study_id(k)] = StudyData(
            study_id=_study_id(k), times=etimes, status=estatus, covariates=ex
        )

    fit_idx = fit_study_indices(K, scenario.K_fit, scenario.sigma_scenario)
    holdout_idx = np.setdiff1d(np.arange(K), fit_idx)
    return SimulatedCollection(
        fit_studies=[studies[k] for k in fit_idx],
        holdout_studies=[studies[k] for k in holdout_idx],
        eval_sets=eval_sets,
        coefficients=coefficients,
        sigma_true=sigma_true,
        fit_indices=fit_idx,
        holdout_indices=holdout_idx,
    )


def affine_transform(study: StudyData, shift: float = 10.0, scale: float = -3.0) -> StudyData:
    """Covariate distortion x -> shift + scale * x, applied to every feature."""
    return StudyData(
        study_id=study.study_id,
        times=study.times,
        status=study.status,
        covariates=shift + scale * study.covariates,
    )
