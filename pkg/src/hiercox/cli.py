"""Command-line orchestration: ingestion, simulation, fitting, evaluation,
and benchmarking.

Subcommands: ``simulate``, ``fit``, ``cv``, ``evaluate``, ``benchmark``,
``transform``.  Exit codes: 0 success, 2 validation error, 3 convergence
failure, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import baselines, selection, similarity
from .admm import SolverOptions, fit as admm_fit
from .errors import (
    GridSearchError,
    NumericalFailureError,
    SolverStallError,
    UndefinedStatisticError,
    ValidationError,
)
from .penalties import PenaltyConfig, SimilarityMatrix
from .selection import CvPlan, CvResult, grid_search
from .simgen import SimScenario, affine_transform, gen_collection
from .survival import StudyData, concordance

log = logging.getLogger("hiercox")

METHODS = ("HR-R", "HR-L", "HR-M", "SL", "SR", "PL", "PR", "FE", "RE")
HR_METHODS = ("HR-R", "HR-L", "HR-M")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_NUMERICAL = 4

DEFAULT_BASELINE_GRID = tuple(np.logspace(-2, 2, 5))


@dataclass
class FitConfig:
    """Method choice plus penalty, solver, and cross-validation settings."""

    method: str = "HR-R"
    lambda0: float | None = None
    lambda1: float | None = None
    a: int = 2
    rho: float = 1.0
    epsilon: float = 1e-5
    max_iter: int = 2000
    inner_tol: float = 1e-7
    sigma_source: str = "estimate"
    sigma_path: str | None = None
    sigma_scale: float = 1.0
    cv_splits: int = 20
    train_fraction: float = 0.8
    lambda0_grid: tuple = ()
    lambda1_grid: tuple = ()
    baseline_grid: tuple = DEFAULT_BASELINE_GRID
    standardize: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.sigma_source not in ("estimate", "file", "identity"):
            raise ValidationError("sigma_source must be estimate, file, or identity")
        if self.sigma_source == "file" and not self.sigma_path:
            raise ValidationError("sigma_source=file requires sigma_path")
        if self.sigma_scale <= 0:
            raise ValidationError("sigma_scale must be positive")
        if self.method == "HR-R":
            if self.lambda0 not in (None, 0.0):
                raise ValidationError("HR-R fixes lambda0 = 0")
            self.a = 2
            self.lambda0 = 0.0
        elif self.method == "HR-L":
            if self.lambda1 not in (None, 0.0):
                raise ValidationError("HR-L fixes lambda1 = 0")
            self.a = 2
            self.lambda1 = 0.0
        elif self.method == "HR-M":
            self.a = 1

    def hr_grid(self) -> list[tuple[float, float]]:
        lambda0_values = (
            [self.lambda0]
            if self.lambda0 is not None
            else list(self.lambda0_grid)
            or [0.0] + list(np.logspace(-3, 1, 7))
        )
        lambda1_values = (
            [self.lambda1]
            if self.lambda1 is not None
            else list(self.lambda1_grid)
            or list(np.logspace(-3, 2, 8))
        )
        return [(float(l0), float(l1)) for l0 in lambda0_values for l1 in lambda1_values]

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            rho=self.rho,
            epsilon=self.epsilon,
            max_iter=self.max_iter,
            inner_tol=self.inner_tol,
        )


@dataclass
class AffineMap:
    """Per-study standardization map learned on the fit data."""

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale


def standardize_study(study: StudyData) -> tuple[StudyData, AffineMap]:
    mean = study.covariates.mean(axis=0)
    scale = study.covariates.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    mapped = StudyData(
        study_id=study.study_id,
        times=study.times,
        status=study.status,
        covariates=(study.covariates - mean) / scale,
    )
    return mapped, AffineMap(mean=mean, scale=scale)


def self_standardize(study: StudyData) -> StudyData:
    return standardize_study(study)[0]


@dataclass
class EvaluationReport:
    """Everything one fit run produced, serializable to a single JSON document."""

    config: FitConfig
    method: str
    selected: dict
    in_study: dict
    holdout: dict
    center: np.ndarray | None
    per_study: dict
    sigma: np.ndarray | None
    standardization: dict
    convergence: dict | None
    cv: dict | None
    feature_names: list[str] | None = None
    replicate: int = 0

    def to_json(self) -> str:
        doc = {
            "config": _jsonable(asdict(self.config)),
            "method": self.method,
            "selected": _jsonable(self.selected),
            "scores": {
                "in_study": _jsonable(self.in_study),
                "holdout": _jsonable(self.holdout),
            },
            "coefficients": {
                "center": _jsonable(self.center),
                "center_zero_flags": (
                    [bool(v == 0.0) for v in self.center] if self.center is not None else None
                ),
                "per_study": _jsonable(self.per_study),
            },
            "sigma": _jsonable(self.sigma),
            "standardization": {
                sid: {"mean": _jsonable(m.mean), "scale": _jsonable(m.scale)}
                for sid, m in self.standardization.items()
            },
            "convergence": _jsonable(self.convergence),
            "cv": _jsonable(self.cv),
            "feature_names": self.feature_names,
            "replicate": self.replicate,
        }
        return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# CSV ingestion / emission
# ---------------------------------------------------------------------------

REQUIRED_COLUMNS = ("time", "status")


def _read_study_csv(path) -> tuple[str, np.ndarray, np.ndarray, list[str], np.ndarray]:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        for col in REQUIRED_COLUMNS:
            if col not in header:
                raise ValidationError(f"{path}: missing required column {col!r}")
        time_col = header.index("time")
        status_col = header.index("status")
        feature_cols = [i for i in range(len(header)) if i not in (time_col, status_col)]
        feature_names = [header[i] for i in feature_cols]

        times, status, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}"
                )
            try:
                t = float(row[time_col])
                s = int(float(row[status_col]))
                x = [float(row[i]) for i in feature_cols]
            except ValueError as exc:
                raise ValidationError(f"{path}: row {lineno}: {exc}") from None
            if t <= 0:
                raise ValidationError(f"{path}: row {lineno}: non-positive time {t}")
            if s not in (0, 1):
                raise ValidationError(f"{path}: row {lineno}: status must be 0 or 1")
            times.append(t)
            status.append(s)
            rows.append(x)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return path.stem, np.array(times), np.array(status), feature_names, np.array(rows)


def ingest(paths) -> tuple[list[StudyData], list[str]]:
    """Load one study per CSV file and intersect their feature columns.

    Returns the studies (columns aligned to the shared feature order of the
    first file) and the shared feature names.
    """
    if not paths:
        raise ValidationError("at least one CSV file is required")
    raw = [_read_study_csv(p) for p in paths]

    shared = [name for name in raw[0][3] if all(name in r[3] for r in raw[1:])]
    if not shared:
        raise ValidationError("the studies share no feature columns")
    for stem, _, _, names, _ in raw:
        dropped = [n for n in names if n not in shared]
        if dropped:
            log.warning(
                "study %s: dropping %d feature(s) absent elsewhere: %s",
                stem,
                len(dropped),
                ", ".join(dropped[:10]) + ("..." if len(dropped) > 10 else ""),
            )

    studies = []
    for stem, times, status, names, x in raw:
        cols = [names.index(n) for n in shared]
        studies.append(
            StudyData(study_id=stem, times=times, status=status, covariates=x[:, cols])
        )
    return studies, shared


def write_study_csv(study: StudyData, path, feature_names=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = feature_names or [f"x{j + 1}" for j in range(study.p)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "status", *names])
        for i in range(study.n):
            writer.writerow(
                [repr(float(study.times[i])), int(study.status[i])]
                + [repr(float(v)) for v in study.covariates[i]]
            )


# ---------------------------------------------------------------------------
# Fitting and scoring
# ---------------------------------------------------------------------------


def _resolve_sigma(config: FitConfig, studies: list[StudyData]):
    K = len(studies)
    if config.sigma_source == "identity":
        sigma = SimilarityMatrix.from_values(np.eye(K))
        estimate = None
    elif config.sigma_source == "file":
        values = np.asarray(json.loads(Path(config.sigma_path).read_text()), dtype=float)
        sigma = SimilarityMatrix.from_values(values)
        estimate = None
    else:
        estimate = similarity.estimate_sigma(
            studies, similarity.SimilarityOptions(seed=config.seed)
        )
        sigma = estimate.sigma
    if config.sigma_scale != 1.0:
        sigma = sigma.scaled(config.sigma_scale)
    return sigma, estimate


def _score(coefs: np.ndarray, study: StudyData) -> float:
    return concordance(study.covariates @ coefs, study.times, study.status)


def run_fit(
    config: FitConfig,
    studies: list[StudyData],
    eval_sets: dict[str, StudyData] | None = None,
    holdout_studies: list[StudyData] | None = None,
    replicate: int = 0,
) -> EvaluationReport:
    """Fit the configured method and score in-study and hold-out predictions.

    In-study predictions use each fitted study's own coefficients (its
    standardization map applied to the evaluation covariates); hold-out
    studies are scored with the center coefficients, or with averaged
    per-study C-statistics for the single-study methods.
    """
    eval_sets = eval_sets or {}
    holdout_studies = holdout_studies or []

    if config.standardize:
        pairs = [standardize_study(s) for s in studies]
        fit_studies = [p[0] for p in pairs]
        maps = {s.study_id: p[1] for s, p in zip(studies, pairs)}
    else:
        fit_studies = list(studies)
        maps = {
            s.study_id: AffineMap(mean=np.zeros(s.p), scale=np.ones(s.p)) for s in studies
        }

    def in_eval(study: StudyData) -> StudyData:
        ev = eval_sets.get(study.study_id, study)
        x = maps[study.study_id].apply(ev.covariates) if config.standardize else ev.covariates
        return StudyData(study_id=ev.study_id, times=ev.times, status=ev.status, covariates=x)

    def out_eval(study: StudyData) -> StudyData:
        ev = eval_sets.get(study.study_id, study)
        return self_standardize(ev) if config.standardize else ev

    sigma_values = None
    convergence = None
    cv_doc = None
    selected: dict = {}
    center = None
    per_study: dict = {}
    in_study: dict = {}
    holdout: dict = {}

    if config.method in HR_METHODS:
        sigma, _ = _resolve_sigma(config, fit_studies)
        sigma_values = sigma.values
        grid = config.hr_grid()
        if len(grid) == 1:
            lam0, lam1 = grid[0]
            cfg = PenaltyConfig(lambda0=lam0, lambda1=lam1, a=config.a, sigma=sigma)
            bundle, report = admm_fit(fit_studies, cfg, config.solver_options())
        else:
            plan = CvPlan(
                n_splits=config.cv_splits,
                train_fraction=config.train_fraction,
                grid=grid,
                seed=config.seed,
            )
            result = grid_search(
                fit_studies, sigma, plan, a=config.a, solver_opts=config.solver_options()
            )
            bundle, report = result.bundle, result.report
            lam0, lam1 = result.selected
            cv_doc = {
                "grid": result.grid,
                "mean_scores": result.mean_scores,
                "split_scores": result.split_scores,
                "study_scores": result.study_scores,
                "weights": result.weights,
            }
        selected = {"lambda0": lam0, "lambda1": lam1, "a": config.a}
        convergence = {
            "converged": report.converged,
            "iterations": report.iterations,
            "final_primal_residual": report.final_primal_residual,
            "final_z_change": report.final_z_change,
        }
        center = bundle[0]
        per_study = {s.study_id: bundle[k + 1] for k, s in enumerate(fit_studies)}
        for k, s in enumerate(studies):
            in_study[s.study_id] = _score(bundle[k + 1], in_eval(s))
        for s in holdout_studies:
            holdout[s.study_id] = _score(center, out_eval(s))

    elif config.method in ("SL", "SR"):
        penalty = "lasso" if config.method == "SL" else "ridge"
        plan = CvPlan(
            n_splits=config.cv_splits,
            train_fraction=config.train_fraction,
            grid=[(0.0, 0.0)],
            seed=config.seed,
        )
        lambdas = {}
        for s in fit_studies:
            coef, lam = baselines.choose_lambda_single(
                s, penalty, config.baseline_grid, plan
            )
            per_study[s.study_id] = coef
            lambdas[s.study_id] = lam
        selected = {"lambda": lambdas}
        for s in studies:
            in_study[s.study_id] = _score(per_study[s.study_id], in_eval(s))
        for s in holdout_studies:
            ev = out_eval(s)
            cs = [_score(per_study[t.study_id], ev) for t in studies]
            holdout[s.study_id] = float(np.mean(cs))

    elif config.method in ("PL", "PR"):
        penalty = "lasso" if config.method == "PL" else "ridge"
        plan = CvPlan(
            n_splits=config.cv_splits,
            train_fraction=config.train_fraction,
            grid=[(0.0, 0.0)],
            seed=config.seed,
        )
        center, lam = baselines.choose_lambda_pooled(
            fit_studies, penalty, config.baseline_grid, plan
        )
        selected = {"lambda": lam}
        for s in studies:
            in_study[s.study_id] = _score(center, in_eval(s))
        for s in holdout_studies:
            holdout[s.study_id] = _score(center, out_eval(s))

    elif config.method in ("FE", "RE"):
        plan = CvPlan(
            n_splits=config.cv_splits,
            train_fraction=config.train_fraction,
            grid=[(0.0, 0.0)],
            seed=config.seed,
        )
        estimates, variances, lambdas = [], [], {}
        for s in fit_studies:
            coef, lam = baselines.choose_lambda_single(s, "ridge", config.baseline_grid, plan)
            estimates.append(coef)
            variances.append(baselines.ridge_variances(s, coef, lam))
            per_study[s.study_id] = coef
            lambdas[s.study_id] = lam
        center, tau2 = baselines.meta_combine(
            np.vstack(estimates), np.vstack(variances), config.method
        )
        selected = {"lambda": lambdas, "mean_tau2": float(np.mean(tau2))}
        for s in studies:
            in_study[s.study_id] = _score(center, in_eval(s))
        for s in holdout_studies:
            holdout[s.study_id] = _score(center, out_eval(s))

    else:  # pragma: no cover - guarded in FitConfig
        raise ValidationError(f"unhandled method {config.method!r}")

    return EvaluationReport(
        config=config,
        method=config.method,
        selected=selected,
        in_study=in_study,
        holdout=holdout,
        center=center,
        per_study=per_study,
        sigma=sigma_values,
        standardization=maps,
        convergence=convergence,
        cv=cv_doc,
        replicate=replicate,
    )


# ---------------------------------------------------------------------------
# Benchmarking
# ---------------------------------------------------------------------------


def _benchmark_replicate(scenario: SimScenario, methods, replicate: int, overrides: dict):
    collection = gen_collection(scenario, replicate)
    overrides = {k: v for k, v in overrides.items() if k not in ("method", "seed")}
    rows = []
    for method in methods:
        config = FitConfig(
            method=method,
            seed=scenario.seed * 1_000_003 + replicate,
            **overrides,
        )
        try:
            report = run_fit(
                config,
                collection.fit_studies,
                eval_sets=collection.eval_sets,
                holdout_studies=collection.holdout_studies,
                replicate=replicate,
            )
        except (SolverStallError, NumericalFailureError, GridSearchError,
                UndefinedStatisticError) as exc:
            log.warning("replicate %d method %s failed: %s", replicate, method, exc)
            rows.append(
                {
                    "scenario": scenario.sigma_scenario,
                    "replicate": replicate,
                    "method": method,
                    "study": "",
                    "role": "failed",
                    "c_statistic": "",
                }
            )
            continue
        for sid, c in report.in_study.items():
            rows.append(
                {
                    "scenario": scenario.sigma_scenario,
                    "replicate": replicate,
                    "method": method,
                    "study": sid,
                    "role": "fit",
                    "c_statistic": c,
                }
            )
        for sid, c in report.holdout.items():
            rows.append(
                {
                    "scenario": scenario.sigma_scenario,
                    "replicate": replicate,
                    "method": method,
                    "study": sid,
                    "role": "holdout",
                    "c_statistic": c,
                }
            )
    return rows


def run_benchmark(
    scenario: SimScenario,
    methods,
    replicates: int,
    threads: int = 1,
    fit_overrides: dict | None = None,
) -> list[dict]:
    """Replicate the full generate/fit/score cycle; returns long-format rows."""
    for m in methods:
        if m not in METHODS:
            raise ValidationError(f"unknown method {m!r}")
    overrides = fit_overrides or {}
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_benchmark_replicate, scenario, methods, r, overrides)
                for r in range(replicates)
            ]
            chunks = [f.result() for f in futures]
    else:
        chunks = [
            _benchmark_replicate(scenario, methods, r, overrides)
            for r in range(replicates)
        ]
    rows = [row for chunk in chunks for row in chunk]
    failures = sum(1 for row in rows if row["role"] == "failed")
    if failures:
        log.warning("%d method-replicate fits failed and were excluded", failures)
    return rows


def write_benchmark_csv(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "replicate", "method", "study", "role", "c_statistic"])
        for row in rows:
            if row["role"] == "failed":
                continue
            writer.writerow(
                [
                    row["scenario"],
                    row["replicate"],
                    row["method"],
                    row["study"],
                    row["role"],
                    repr(float(row["c_statistic"])),
                ]
            )


# ---------------------------------------------------------------------------
# Command-line interface
# ---------------------------------------------------------------------------


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker count (default: HIERCOX_THREADS or 1)",
    )
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")


def _load_config(args, **overrides) -> FitConfig:
    payload = {}
    if args.config is not None:
        payload.update(json.loads(Path(args.config).read_text()))
    payload.update({k: v for k, v in overrides.items() if v is not None})
    if args.seed is not None:
        payload["seed"] = args.seed
    for key in ("lambda0_grid", "lambda1_grid", "baseline_grid"):
        if key in payload and payload[key] is not None:
            payload[key] = tuple(payload[key])
    return FitConfig(**payload)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    return max(1, int(os.environ.get("HIERCOX_THREADS", "1")))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiercox",
        description="Multi-study survival models with similarity-weighted shrinkage",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a simulated study collection as CSVs")
    p.add_argument("--scenario", type=Path, required=True, help="scenario JSON file")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--replicate", type=int, default=0)
    _add_common(p)

    p = sub.add_parser("fit", help="fit one method on study CSVs and emit a JSON report")
    p.add_argument("data", nargs="+", type=Path, help="one CSV per study")
    p.add_argument("--method", choices=METHODS, default=None)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)

    p = sub.add_parser("cv", help="run cross-validation only and emit the score grid")
    p.add_argument("data", nargs="+", type=Path)
    p.add_argument("--method", choices=HR_METHODS, default=None)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)

    p = sub.add_parser("evaluate", help="score evaluation CSVs against a stored report")
    p.add_argument("data", nargs="+", type=Path)
    p.add_argument("--report", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)
    _add_common(p)

    p = sub.add_parser("benchmark", help="replicate simulation + fits for several methods")
    p.add_argument("--scenario", type=Path, required=True)
    p.add_argument("--methods", default="HR-R,SR", help="comma-separated method tags")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p)

    p = sub.add_parser("transform", help="apply the affine covariate distortion to a CSV")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--shift", type=float, default=10.0)
    p.add_argument("--scale", type=float, default=-3.0)
    _add_common(p)

    return parser


def _cmd_simulate(args) -> int:
    scenario = SimScenario.from_json(Path(args.scenario).read_text())
    if args.seed is not None:
        scenario.seed = args.seed
    collection = gen_collection(scenario, args.replicate)
    out = Path(args.out)
    for study in collection.fit_studies:
        write_study_csv(study, out / "fit" / f"{study.study_id}.csv")
    for study in collection.holdout_studies:
        write_study_csv(study, out / "holdout" / f"{study.study_id}.csv")
    for sid, study in collection.eval_sets.items():
        write_study_csv(study, out / "eval" / f"{sid}.csv")
    truth = {
        "coefficients": collection.coefficients.tolist(),
        "sigma_true": collection.sigma_true.values.tolist(),
        "fit_indices": collection.fit_indices.tolist(),
        "holdout_indices": collection.holdout_indices.tolist(),
    }
    (out / "truth.json").write_text(json.dumps(truth, sort_keys=True, indent=2))
    print(f"wrote {len(collection.fit_studies)} fit studies to {out}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    config = _load_config(args, method=args.method)
    studies, _ = ingest(args.data)
    report = run_fit(config, studies)
    Path(args.out).write_text(report.to_json())
    print(f"wrote report to {args.out}")
    if report.convergence is not None and not report.convergence["converged"]:
        log.error("final fit did not converge within the iteration cap")
        return EXIT_CONVERGENCE
    return EXIT_OK


def _cmd_cv(args) -> int:
    config = _load_config(args, method=args.method)
    if config.method not in HR_METHODS:
        raise ValidationError("cv applies to the HR methods")
    studies, _ = ingest(args.data)
    if config.standardize:
        studies = [standardize_study(s)[0] for s in studies]
    sigma, _ = _resolve_sigma(config, studies)
    plan = CvPlan(
        n_splits=config.cv_splits,
        train_fraction=config.train_fraction,
        grid=config.hr_grid(),
        seed=config.seed,
    )
    result = grid_search(studies, sigma, plan, a=config.a, solver_opts=config.solver_options())
    doc = {
        "grid": _jsonable(result.grid),
        "mean_scores": _jsonable(result.mean_scores),
        "split_scores": _jsonable(result.split_scores),
        "study_scores": _jsonable(result.study_scores),
        "weights": _jsonable(result.weights),
        "selected": _jsonable(result.selected),
        "sigma": _jsonable(result.sigma.values),
    }
    Path(args.out).write_text(json.dumps(doc, sort_keys=True, indent=2))
    print(f"wrote CV result to {args.out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    doc = json.loads(Path(args.report).read_text())
    studies, shared = ingest(args.data)
    per_study = doc["coefficients"]["per_study"] or {}
    center = doc["coefficients"]["center"]
    standardization = doc.get("standardization", {})
    scores = {}
    for study in studies:
        if study.study_id in per_study:
            coefs = np.asarray(per_study[study.study_id], dtype=float)
            smap = standardization.get(study.study_id)
            x = (
                (study.covariates - np.asarray(smap["mean"])) / np.asarray(smap["scale"])
                if smap
                else study.covariates
            )
        elif center is not None:
            coefs = np.asarray(center, dtype=float)
            x = self_standardize(study).covariates
        else:
            raise ValidationError(f"report holds no coefficients for {study.study_id!r}")
        scores[study.study_id] = concordance(x @ coefs, study.times, study.status)
    text = json.dumps(_jsonable(scores), sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    scenario = SimScenario.from_json(Path(args.scenario).read_text())
    if args.seed is not None:
        scenario.seed = args.seed
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    overrides = {}
    if args.config is not None:
        overrides = json.loads(Path(args.config).read_text())
    rows = run_benchmark(
        scenario, methods, args.replicates, threads=_threads(args), fit_overrides=overrides
    )
    write_benchmark_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_transform(args) -> int:
    studies, shared = ingest([args.input])
    out = affine_transform(studies[0], shift=args.shift, scale=args.scale)
    write_study_csv(out, args.output, feature_names=shared)
    print(f"wrote transformed study to {args.output}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "cv": _cmd_cv,
    "evaluate": _cmd_evaluate,
    "benchmark": _cmd_benchmark,
    "transform": _cmd_transform,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except (SolverStallError, GridSearchError) as exc:
        log.error("%s", exc)
        return EXIT_CONVERGENCE
    except NumericalFailureError as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
