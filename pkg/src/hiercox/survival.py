"""Survival data containers, Breslow partial log-likelihood, and concordance.

The partial log-likelihood uses Breslow's handling of tied event times: every
event at a tied time reuses the full risk set at that time.  All likelihood
code works on a time-sorted copy of the study so that each risk set is a
suffix of the sorted arrays and can be accumulated in one reverse pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UndefinedStatisticError, ValidationError

__all__ = [
    "StudyData",
    "EventTable",
    "PreparedStudy",
    "build_event_table",
    "prepare_study",
    "partial_log_lik",
    "partial_log_lik_grad",
    "partial_log_lik_hessian",
    "concordance",
]


@dataclass(frozen=True)
class StudyData:
    """One study's survival times, censoring indicators, and covariates.

    Parameters
    ----------
    study_id:
        Label used in reports and error messages.
    times:
        Observed follow-up times, strictly positive, shape (n,).
    status:
        1 if the time is an observed event, 0 if censored, shape (n,).
    covariates:
        Covariate matrix, shape (n, p).
    """

    study_id: str
    times: np.ndarray
    status: np.ndarray
    covariates: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        status = np.asarray(self.status, dtype=int)
        covariates = np.atleast_2d(np.asarray(self.covariates, dtype=float))
        if times.ndim != 1:
            raise ValidationError(f"study {self.study_id!r}: times must be 1-D")
        n = times.shape[0]
        if status.shape != (n,):
            raise ValidationError(
                f"study {self.study_id!r}: status has length {status.shape}, expected ({n},)"
            )
        if covariates.shape[0] != n:
            raise ValidationError(
                f"study {self.study_id!r}: covariates have {covariates.shape[0]} rows, expected {n}"
            )
        if not np.all(np.isfinite(times)) or np.any(times <= 0):
            bad = int(np.argmin((times > 0) & np.isfinite(times)))
            raise ValidationError(
                f"study {self.study_id!r}: non-positive or non-finite time at row {bad}"
            )
        if not np.all((status == 0) | (status == 1)):
            bad = int(np.argmax((status != 0) & (status != 1)))
            raise ValidationError(
                f"study {self.study_id!r}: status must be 0 or 1 (row {bad})"
            )
        if not np.any(status == 1):
            raise ValidationError(f"study {self.study_id!r}: no observed events")
        if not np.all(np.isfinite(covariates)):
            raise ValidationError(f"study {self.study_id!r}: non-finite covariate values")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "status", status)
        object.__setattr__(self, "covariates", covariates)

    @property
    def n(self) -> int:
        return self.times.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.status.sum())


@dataclass(frozen=True)
class EventTable:
    """Breslow summary of one study.

    ``risk_index[l]`` is the first position, in the time-sorted copy of the
    study, of the risk set at ``event_times[l]`` (everyone with a sorted time
    at or after that position is still at risk, censored subjects with a time
    exactly equal to the event time included).
    """

    event_times: np.ndarray
    tie_counts: np.ndarray
    tied_covariate_sums: np.ndarray
    risk_index: np.ndarray
    sort_order: np.ndarray
    n: int

    @property
    def n_unique_events(self) -> int:
        return self.event_times.shape[0]

    def risk_set_sizes(self) -> np.ndarray:
        return self.n - self.risk_index


@dataclass(frozen=True)
class PreparedStudy:
    """A study together with its event table and time-sorted covariates."""

    study: StudyData
    table: EventTable
    x_sorted: np.ndarray

    @property
    def study_id(self) -> str:
        return self.study.study_id

    @property
    def p(self) -> int:
        return self.x_sorted.shape[1]


def build_event_table(study: StudyData) -> EventTable:
    """Summarize a study into unique event times, tie counts, and risk-set bounds."""
    order = np.argsort(study.times, kind="stable")
    sorted_times = study.times[order]
    sorted_status = study.status[order]

    event_mask = sorted_status == 1
    event_times = np.unique(sorted_times[event_mask])
    if event_times.size == 0:
        raise ValidationError(f"study {study.study_id!r}: no observed events")

    # Tie counts and tied covariate sums only aggregate status=1 rows.
    ev_times = sorted_times[event_mask]
    ev_x = study.covariates[order][event_mask]
    starts = np.searchsorted(ev_times, event_times, side="left")
    tie_counts = np.diff(np.append(starts, ev_times.size))
    tied_sums = np.add.reduceat(ev_x, starts, axis=0)

    risk_index = np.searchsorted(sorted_times, event_times, side="left")
    return EventTable(
        event_times=event_times,
        tie_counts=tie_counts.astype(int),
        tied_covariate_sums=tied_sums,
        risk_index=risk_index.astype(int),
        sort_order=order,
        n=study.n,
    )


def prepare_study(study: StudyData) -> PreparedStudy:
    table = build_event_table(study)
    return PreparedStudy(study=study, table=table, x_sorted=study.covariates[table.sort_order])


def _check_dims(table: EventTable, sorted_covariates: np.ndarray, beta: np.ndarray):
    beta = np.asarray(beta, dtype=float).ravel()
    if sorted_covariates.shape[0] != table.n:
        raise ValidationError(
            f"sorted covariates have {sorted_covariates.shape[0]} rows, expected {table.n}"
        )
    if sorted_covariates.shape[1] != beta.shape[0]:
        raise ValidationError(
            f"beta has length {beta.shape[0]}, covariates have {sorted_covariates.shape[1]} columns"
        )
    return beta


def partial_log_lik(table: EventTable, sorted_covariates: np.ndarray, beta: np.ndarray) -> float:
    """Breslow partial log-likelihood at ``beta``.

    Returns ``sum_l { xtilde_l' beta - d_l * log sum_{i in risk set l} exp(x_i' beta) }``.
    Risk-set log-sums are accumulated with a running-maximum rescale
    (``logaddexp``) so the value is finite for any finite ``beta``.
    """
    beta = _check_dims(table, sorted_covariates, beta)
    eta = sorted_covariates @ beta
    # Suffix log-sum-exp over the time-sorted linear predictors.
    log_risk = np.logaddexp.accumulate(eta[::-1])[::-1]
    event_part = float(np.dot(table.tied_covariate_sums.sum(axis=0), beta))
    return event_part - float(np.dot(table.tie_counts, log_risk[table.risk_index]))


def partial_log_lik_grad(
    table: EventTable, sorted_covariates: np.ndarray, beta: np.ndarray
) -> np.ndarray:
    """Analytic gradient of :func:`partial_log_lik`.

    Per unique event time the contribution is the tied covariate sum minus
    ``d_l`` times the exp-weighted covariate mean over the risk set.
    """
    beta = _check_dims(table, sorted_covariates, beta)
    eta = sorted_covariates @ beta
    shift = float(np.max(eta))
    w = np.exp(eta - shift)
    s0 = np.cumsum(w[::-1])[::-1]
    s0_at = s0[table.risk_index]
    if np.all(s0_at > 0.0) and np.all(np.isfinite(s0_at)):
        s1 = np.cumsum((w[:, None] * sorted_covariates)[::-1], axis=0)[::-1]
        means = s1[table.risk_index] / s0_at[:, None]
    else:
        # A global shift can underflow every member of a late risk set; redo
        # those sums with the risk set's own maximum.
        means = _risk_means_exact(table, sorted_covariates, eta)
    return table.tied_covariate_sums.sum(axis=0) - table.tie_counts @ means


def _risk_means_exact(table: EventTable, x: np.ndarray, eta: np.ndarray) -> np.ndarray:
    means = np.empty((table.n_unique_events, x.shape[1]))
    for el in range(table.n_unique_events):
        idx = table.risk_index[el]
        e = eta[idx:]
        m = float(np.max(e))
        w = np.exp(e - m)
        means[el] = (w @ x[idx:]) / w.sum()
    return means


def partial_log_lik_hessian(
    table: EventTable, sorted_covariates: np.ndarray, beta: np.ndarray
) -> np.ndarray:
    """Hessian of the Breslow partial log-likelihood (negative semi-definite).

    Accumulated over unique event times in descending order; subjects join
    the weighted sums as they enter the risk set.
    """
    beta = _check_dims(table, sorted_covariates, beta)
    p = sorted_covariates.shape[1]
    eta = sorted_covariates @ beta
    shift = float(np.max(eta))
    w = np.exp(eta - shift)

    hess = np.zeros((p, p))
    s0 = 0.0
    s1 = np.zeros(p)
    s2 = np.zeros((p, p))
    boundary = table.n
    for el in range(table.n_unique_events - 1, -1, -1):
        idx = table.risk_index[el]
        seg = slice(idx, boundary)
        wx = w[seg, None] * sorted_covariates[seg]
        s0 += float(w[seg].sum())
        s1 += wx.sum(axis=0)
        s2 += sorted_covariates[seg].T @ wx
        boundary = idx
        mean = s1 / s0
        hess -= table.tie_counts[el] * (s2 / s0 - np.outer(mean, mean))
    return hess


def concordance(scores, times, status) -> float:
    """Harrell-style concordance of risk scores against survival times.

    A pair is comparable when the subject with the strictly earlier time had
    an observed event; the pair is concordant when that subject also has the
    higher score.  Tied scores contribute 1/2.

    Raises
    ------
    UndefinedStatisticError
        If no comparable pair exists.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    times = np.asarray(times, dtype=float).ravel()
    status = np.asarray(status, dtype=int).ravel()
    if not (scores.shape == times.shape == status.shape):
        raise ValidationError("scores, times, and status must have equal length")

    n = scores.shape[0]
    num = 0.0
    den = 0
    # Row-chunked O(n^2) comparison keeps memory bounded for large eval sets.
    chunk = max(1, min(n, 256 * 1024 // max(n, 1) + 1))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        earlier = (times[lo:hi, None] < times[None, :]) & (status[lo:hi, None] == 1)
        if not earlier.any():
            continue
        higher = scores[lo:hi, None] > scores[None, :]
        tied = scores[lo:hi, None] == scores[None, :]
        den += int(earlier.sum())
        num += float((earlier & higher).sum()) + 0.5 * float((earlier & tied).sum())
    if den == 0:
        raise UndefinedStatisticError("no comparable pairs for concordance")
    return num / den
