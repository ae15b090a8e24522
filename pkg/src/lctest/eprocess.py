"""Batched universal-likelihood-ratio e-process for log-concavity.

At each schedule time the numerator gains the log-likelihood of the newest
batch under an estimator trained on all earlier batches, and the denominator
is the log-concave MLE over every scored observation.  Observations up to the
first schedule time ``t_1`` only train the estimator, so ``R_t = 1`` for
``t <= t_1``.  Each MLE's certified suboptimality gap is subtracted from
``log R``, which keeps the process an e-process even with an inexact solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

import numpy as np

from .estimators import EstimatorSpec
from .lcmle import (
    DEFAULT_TOL,
    DegenerateSampleError,
    PiecewiseLogLinearDensity,
    WeightedSortedSample,
    fit_lcmle,
)

R_CLIP = 1e308


class EstimatorContractError(RuntimeError):
    """An estimator produced a non-finite log density on a finite point."""


@dataclass(frozen=True)
class BatchSchedule:
    """Increasing recomputation times ``t_1 < t_2 < ...``.

    Either explicit ``times`` or a uniform ``interval`` (``t_k = k * I``,
    lifted to at least ``dim + 1``).  Explicit schedules end after their last
    time; uniform ones never end.
    """

    times: tuple[int, ...] = ()
    interval: int | None = None
    dim: int = 1

    def __post_init__(self):
        times = tuple(int(t) for t in self.times)
        object.__setattr__(self, "times", times)
        if self.interval is None:
            if not times:
                raise ValueError("schedule needs times or an interval")
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError("schedule times must be strictly increasing")
            if times[0] < self.dim + 1:
                raise ValueError(f"first schedule time must be >= {self.dim + 1}")
        else:
            if times:
                raise ValueError("give either times or interval, not both")
            if int(self.interval) < 1:
                raise ValueError("interval must be positive")

    @classmethod
    def uniform(cls, interval: int, dim: int = 1) -> "BatchSchedule":
        return cls(interval=int(interval), dim=dim)

    @classmethod
    def parse(cls, text: str) -> "BatchSchedule":
        return cls(times=tuple(int(p) for p in text.split(",") if p.strip()))

    def time(self, k: int) -> int | None:
        """``t_k`` (1-based), or None past the end of an explicit schedule."""
        if self.interval is not None:
            first = max(self.interval, self.dim + 1)
            return first + (k - 1) * self.interval if self.interval < first else k * self.interval
        return self.times[k - 1] if k <= len(self.times) else None

    def up_to(self, horizon: int) -> list[int]:
        out, k = [], 1
        while (t := self.time(k)) is not None and t <= horizon:
            out.append(t)
            k += 1
        return out


@dataclass(frozen=True)
class EProcessState:
    """Running state.  ``buffer`` holds every observation; the scored
    observations are ``buffer[scored_from:scored_through]`` and ``scores``
    holds their log-likelihood under the predictive estimator."""

    t: int = 0
    K: int = 1
    log_numerator: float = 0.0
    log_R: float = 0.0
    cumulative_gap: float = 0.0
    buffer: tuple[float, ...] = ()
    scores: tuple[float, ...] = ()
    scored_from: int = 0
    scored_through: int = 0
    mle: PiecewiseLogLinearDensity | None = None
    mle_loglik: float = 0.0
    deferred: tuple[int, ...] = ()
    trace: tuple[tuple[int, float], ...] = ()

    @property
    def R(self) -> float:
        return min(math.exp(min(self.log_R, 709.0)), R_CLIP)

    @property
    def scored(self) -> np.ndarray:
        return np.asarray(self.buffer[self.scored_from:self.scored_through])

    def bookkeeping_residual(self) -> float:
        """``log_R + gap + loglik(mle) - log_numerator``; zero up to rounding."""
        return self.log_R + self.cumulative_gap + self.mle_loglik - self.log_numerator


@dataclass(frozen=True)
class TestOutcome:
    rejected: bool
    rejection_time: int | None
    final_log_R: float
    trace: tuple[tuple[int, float], ...]
    state: EProcessState | None = field(default=None, repr=False, compare=False)


def _score_batch(estimator: EstimatorSpec, train, batch) -> np.ndarray:
    q = estimator.fit(np.asarray(train, dtype=float))
    lq = np.atleast_1d(np.asarray(q.logpdf(np.asarray(batch, dtype=float)), dtype=float))
    if not np.all(np.isfinite(lq)):
        raise EstimatorContractError(
            f"{estimator.label()} returned a non-finite log density on the batch"
        )
    return lq


def eprocess_step(
    state: EProcessState,
    x: float,
    schedule: BatchSchedule,
    estimator: EstimatorSpec,
    mle_tol: float = DEFAULT_TOL,
) -> EProcessState:
    """Absorb one observation and return the next state."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"observation must be finite, got {x!r}")
    t = state.t + 1
    buffer = state.buffer + (x,)
    if t != schedule.time(state.K):
        return replace(state, t=t, buffer=buffer)

    K = state.K + 1
    if state.K == 1:
        # first batch only trains the estimator
        return replace(state, t=t, K=K, buffer=buffer, scored_from=t,
                       scored_through=t, trace=state.trace + ((t, state.log_R),))

    lq = _score_batch(estimator, buffer[:state.scored_through],
                      buffer[state.scored_through:t])
    scored = buffer[state.scored_from:t]
    try:
        report = fit_lcmle(WeightedSortedSample.from_values(scored), tol=mle_tol)
    except DegenerateSampleError:
        return replace(state, t=t, K=K, buffer=buffer,
                       deferred=state.deferred + (t,),
                       trace=state.trace + ((t, state.log_R),))

    log_numerator = state.log_numerator + float(np.sum(lq))
    cumulative_gap = state.cumulative_gap + report.gap
    log_R = log_numerator - report.loglik - cumulative_gap
    return replace(
        state,
        t=t,
        K=K,
        buffer=buffer,
        scores=state.scores + tuple(lq.tolist()),
        scored_through=t,
        log_numerator=log_numerator,
        cumulative_gap=cumulative_gap,
        log_R=log_R,
        mle=report.density,
        mle_loglik=report.loglik,
        trace=state.trace + ((t, log_R),),
    )


def iter_eprocess(
    stream: Iterable[float],
    schedule: BatchSchedule,
    estimator: EstimatorSpec,
    mle_tol: float = DEFAULT_TOL,
) -> Iterator[EProcessState]:
    state = EProcessState()
    for x in stream:
        state = eprocess_step(state, x, schedule, estimator, mle_tol)
        yield state


def log_threshold(alpha: float) -> float:
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    return -math.log(alpha)


def rejection_time(trace, alpha: float) -> int | None:
    """First ``t`` with ``log_R >= log(1/alpha)``, else None."""
    thr = log_threshold(alpha)
    for t, lr in trace:
        if lr >= thr:
            return int(t)
    return None


def run_test(
    stream: Iterable[float],
    schedule: BatchSchedule,
    estimator: EstimatorSpec,
    alpha: float = 0.1,
    mle_tol: float = DEFAULT_TOL,
    stop_on_reject: bool = True,
) -> TestOutcome:
    """Run the sequential test over ``stream``.

    With ``stop_on_reject`` the run ends at the first crossing, as a
    sequential test would; otherwise the whole stream is processed and the
    rejection time is still the first crossing.
    """
    thr = log_threshold(alpha)
    state = EProcessState()
    tau = None
    for state in iter_eprocess(stream, schedule, estimator, mle_tol):
        if tau is None and state.trace and state.trace[-1][0] == state.t and state.log_R >= thr:
            tau = state.t
            if stop_on_reject:
                break
    return TestOutcome(tau is not None, tau, state.log_R, state.trace, state)


# ---------------------------------------------------------------------------
# diagnostics


def sigma_diagnostic(truth, buffer, mle_tol: float = DEFAULT_TOL) -> float:
    """``sum_s log p(X_s) - log phat(X_s)`` with ``phat`` the MLE of ``buffer``.

    Nonpositive up to ``mle_tol`` when ``p`` is log-concave.
    """
    pts = np.asarray(buffer, dtype=float)
    report = fit_lcmle(WeightedSortedSample.from_values(pts), tol=mle_tol)
    lp = np.asarray(truth.logpdf(pts), dtype=float)
    if np.any(~np.isfinite(lp)):
        raise ValueError("buffer has points outside the truth's support")
    return float(np.sum(lp) - np.sum(report.density.logpdf(pts)))


def batched_scores(stream, schedule: BatchSchedule, estimator: EstimatorSpec):
    """Replay only the numerator: returns (scored points, their log q values).

    Batches are deferred exactly when the e-process would defer them (fewer
    than two distinct scored values), without fitting any MLE.
    """
    xs = np.asarray(list(stream), dtype=float)
    scored_from = scored_through = None
    scores: list[np.ndarray] = []
    k = 1
    while (tk := schedule.time(k)) is not None and tk <= len(xs):
        if k == 1:
            scored_from = scored_through = tk
        elif len(np.unique(xs[scored_from:tk])) >= 2:
            scores.append(_score_batch(estimator, xs[:scored_through], xs[scored_through:tk]))
            scored_through = tk
        k += 1
    if scored_from is None:
        return np.empty(0), np.empty(0)
    lq = np.concatenate(scores) if scores else np.empty(0)
    return xs[scored_from:scored_through], lq


def regret_diagnostic(truth, stream, schedule: BatchSchedule, estimator: EstimatorSpec) -> float:
    """Batched prediction regret ``sum_s log p(X_s) - log qhat(X_s)`` over
    every observation scored after the first schedule time."""
    pts, lq = batched_scores(stream, schedule, estimator)
    if len(pts) == 0:
        return 0.0
    return float(np.sum(np.asarray(truth.logpdf(pts), dtype=float)) - np.sum(lq))


@dataclass(frozen=True)
class Decomposition:
    sigma: float
    rho: float
    residual: float


def decomposition(state: EProcessState, truth) -> Decomposition:
    """Split ``log R + gap`` into the null-MLE gap and the estimator regret.

    ``residual = log_R + cumulative_gap - (sigma - rho)`` should vanish.
    """
    if state.mle is None:
        return Decomposition(0.0, 0.0, state.log_R + state.cumulative_gap)
    pts = state.scored
    lp = np.asarray(truth.logpdf(pts), dtype=float)
    sigma = float(np.sum(lp) - np.sum(state.mle.logpdf(pts)))
    rho = float(np.sum(lp) - np.sum(state.scores))
    return Decomposition(sigma, rho, state.log_R + state.cumulative_gap - (sigma - rho))
