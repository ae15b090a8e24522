"""Monte-Carlo harness for the Gaussian-mixture test-bed.

Every (mu, rep) pair gets its own seed ``base_seed XOR hash(mu, rep)``, so a
run's stream depends only on those three numbers.  Different estimators or
batching intervals therefore see identical streams (common random numbers),
and results do not depend on worker count or completion order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .density import GaussianMixture1D, derive_seed, sample_mixture
from .eprocess import BatchSchedule, decomposition, eprocess_step, EProcessState, log_threshold
from .estimators import EstimatorSpec
from .lcmle import DEFAULT_TOL

SUMMARY_HEADER = ["mu", "checkpoint", "rejection_fraction", "n_reps", "mean_tau", "median_tau"]
RUNS_HEADER = ["mu", "rep", "seed", "tau", "final_log_r"]


class ConfigError(ValueError):
    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


class ExperimentError(RuntimeError):
    pass


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def default_checkpoints(horizon: int) -> tuple[int, ...]:
    """Five evenly spaced checkpoints ending at the horizon."""
    return tuple(sorted({max(1, horizon * k // 5) for k in range(1, 6)}))


@dataclass(frozen=True)
class ExperimentConfig:
    mu_values: tuple[float, ...] = (0.0,)
    alpha: float = 0.1
    horizon: int = 100
    interval: int | None = 20
    schedule: tuple[int, ...] | None = None
    reps: int = 100
    estimator: EstimatorSpec = field(default_factory=EstimatorSpec)
    checkpoints: tuple[int, ...] = (20, 40, 60, 80, 100)
    base_seed: int = 0
    mle_tol: float = DEFAULT_TOL
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mu_values", tuple(float(m) for m in self.mu_values))
        object.__setattr__(self, "checkpoints", tuple(int(c) for c in self.checkpoints))
        if self.schedule is not None:
            object.__setattr__(self, "schedule", tuple(int(t) for t in self.schedule))
        self.validate()

    def validate(self):
        if not self.mu_values:
            raise ConfigError("mu_values", "must be nonempty")
        for i, m in enumerate(self.mu_values):
            if not (math.isfinite(m) and m >= 0):
                raise ConfigError(f"mu_values[{i}]", "must be finite and nonnegative")
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigError("alpha", f"must lie in (0, 1], got {self.alpha}")
        if self.horizon < 1:
            raise ConfigError("horizon", "must be a positive integer")
        if self.reps < 1:
            raise ConfigError("reps", "must be a positive integer")
        if (self.interval is None) == (self.schedule is None):
            raise ConfigError("interval", "give exactly one of interval or schedule")
        if self.interval is not None and self.interval < 1:
            raise ConfigError("interval", "must be a positive integer")
        try:
            self.batch_schedule()
        except ValueError as exc:
            raise ConfigError("schedule", str(exc)) from None
        if not self.checkpoints:
            raise ConfigError("checkpoints", "must be nonempty")
        if any(b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
            raise ConfigError("checkpoints", "must be strictly increasing")
        if self.checkpoints[0] < 1 or self.checkpoints[-1] > self.horizon:
            raise ConfigError("checkpoints", "must lie in [1, horizon]")
        if not self.mle_tol > 0:
            raise ConfigError("mle_tol", "must be positive")
        if self.base_seed < 0:
            raise ConfigError("base_seed", "must be an unsigned integer")
        if self.workers < 1:
            raise ConfigError("workers", "must be a positive integer")

    def batch_schedule(self) -> BatchSchedule:
        if self.schedule is not None:
            return BatchSchedule(times=self.schedule)
        return BatchSchedule.uniform(self.interval)

    def to_dict(self) -> dict:
        d = {
            "mu_values": list(self.mu_values),
            "alpha": self.alpha,
            "horizon": self.horizon,
            "reps": self.reps,
            "estimator": self.estimator.to_dict(),
            "checkpoints": list(self.checkpoints),
            "base_seed": self.base_seed,
            "mle_tol": self.mle_tol,
        }
        if self.schedule is not None:
            d["schedule"] = list(self.schedule)
        else:
            d["interval"] = self.interval
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        d = dict(raw)
        kw = {}
        known = {"mu_values", "alpha", "horizon", "interval", "schedule", "reps",
                 "estimator", "checkpoints", "base_seed", "mle_tol", "workers"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        casts = {"alpha": float, "horizon": int, "reps": int, "base_seed": int,
                 "mle_tol": float, "workers": int, "interval": int}
        for key, cast in casts.items():
            if key in d and d[key] is not None:
                val = d[key]
                if isinstance(val, bool) or not isinstance(val, (int, float)):
                    raise ConfigError(key, f"expected a number, got {val!r}")
                if cast is int and not isinstance(val, int) and not float(val).is_integer():
                    raise ConfigError(key, f"expected an integer, got {val!r}")
                kw[key] = cast(val)
        for key in ("mu_values", "checkpoints", "schedule"):
            if key in d and d[key] is not None:
                if not isinstance(d[key], list):
                    raise ConfigError(key, "expected a list")
                for i, v in enumerate(d[key]):
                    if isinstance(v, bool) or not isinstance(v, (int, float)):
                        raise ConfigError(f"{key}[{i}]", f"expected a number, got {v!r}")
                kw[key] = tuple(d[key])
        if "schedule" in kw:
            kw.setdefault("interval", None)
        if "estimator" in d:
            try:
                kw["estimator"] = EstimatorSpec.from_dict(d["estimator"])
            except (ValueError, TypeError, AttributeError) as exc:
                raise ConfigError("estimator", str(exc)) from None
        if "checkpoints" not in kw:
            horizon = kw.get("horizon", 100)
            kw["checkpoints"] = default_checkpoints(horizon)
        return cls(**kw)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON: {exc}") from None
        return cls.from_dict(raw)


@dataclass(frozen=True)
class RunRecord:
    mu: float
    rep: int
    seed: int
    rejection_time: int | None
    final_log_r: float
    trace: tuple[tuple[int, float], ...]
    stream_hash: str = ""
    max_residual: float = 0.0

    def log_r_at(self, t: int) -> float:
        """``log R_t`` read off the piecewise-constant trace."""
        out = 0.0
        for tk, lr in self.trace:
            if tk > t:
                break
            out = lr
        return out


@dataclass(frozen=True)
class SummaryRow:
    mu: float
    checkpoint: int
    rejection_fraction: float
    n_reps: int
    mean_tau: float
    median_tau: float


@dataclass(frozen=True)
class SummaryTable:
    rows: tuple[SummaryRow, ...]
    config: ExperimentConfig

    def fraction(self, mu: float, checkpoint: int) -> float:
        for r in self.rows:
            if r.mu == float(mu) and r.checkpoint == int(checkpoint):
                return r.rejection_fraction
        raise KeyError((mu, checkpoint))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in self.rows:
            w.writerow([fmt(r.mu), fmt(r.checkpoint), fmt(r.rejection_fraction),
                        fmt(r.n_reps), fmt(r.mean_tau), fmt(r.median_tau)])
        return buf.getvalue()


def runs_to_csv(runs: Sequence[RunRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUNS_HEADER)
    for r in runs:
        w.writerow([fmt(r.mu), fmt(r.rep), fmt(r.seed), fmt(r.rejection_time),
                    fmt(r.final_log_r)])
    return buf.getvalue()


def stream_hash(x: np.ndarray) -> str:
    return hashlib.blake2b(np.ascontiguousarray(x, dtype="<f8").tobytes(), digest_size=16).hexdigest()


def run_single(config: ExperimentConfig, mu: float, rep: int) -> RunRecord:
    """One replication: draw the stream, run the e-process to the horizon.

    The whole horizon is processed even after a crossing so that the trace
    is complete; the rejection time is the first crossing.
    """
    seed = derive_seed(config.base_seed, float(mu), int(rep))
    x = sample_mixture(mu, config.horizon, seed)
    truth = GaussianMixture1D(mu)
    schedule = config.batch_schedule()
    estimator = config.estimator.with_oracle_mu(mu)
    thr = log_threshold(config.alpha)
    state = EProcessState()
    tau = None
    worst = 0.0
    for xi in x:
        before = len(state.trace)
        state = eprocess_step(state, xi, schedule, estimator, config.mle_tol)
        if len(state.trace) > before:
            worst = max(worst, abs(decomposition(state, truth).residual))
            if tau is None and state.log_R >= thr:
                tau = state.t
    return RunRecord(mu=float(mu), rep=int(rep), seed=seed, rejection_time=tau,
                     final_log_r=state.log_R, trace=state.trace,
                     stream_hash=stream_hash(x), max_residual=worst)


def _run_task(args):
    config, mu, rep = args
    try:
        return run_single(config, mu, rep)
    except Exception as exc:
        seed = derive_seed(config.base_seed, float(mu), int(rep))
        raise ExperimentError(
            f"run failed (mu={mu}, rep={rep}, seed={seed}): {type(exc).__name__}: {exc}"
        ) from exc


def summarize(config: ExperimentConfig, runs: Sequence[RunRecord]) -> SummaryTable:
    rows = []
    for mu in config.mu_values:
        taus = [r.rejection_time for r in runs if r.mu == mu]
        n = len(taus)
        for c in config.checkpoints:
            hit = sorted(t for t in taus if t is not None and t <= c)
            frac = len(hit) / n if n else float("nan")
            mean_tau = float(np.mean(hit)) if hit else float("nan")
            median_tau = float(np.median(hit)) if hit else float("nan")
            rows.append(SummaryRow(mu, c, frac, n, mean_tau, median_tau))
    return SummaryTable(tuple(rows), config)


def run_experiment(config: ExperimentConfig) -> tuple[SummaryTable, list[RunRecord]]:
    """All (mu, rep) replications, aggregated into checkpointed rejection
    fractions.  Any failed replication aborts the experiment."""
    tasks = [(config, mu, rep) for mu in config.mu_values for rep in range(config.reps)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            runs = list(pool.map(_run_task, tasks, chunksize=4))
    else:
        runs = [_run_task(t) for t in tasks]
    runs.sort(key=lambda r: (config.mu_values.index(r.mu), r.rep))
    return summarize(config, runs), runs


def _check_common_streams(results: dict):
    hashes = None
    for key, (_, runs) in results.items():
        h = [(r.mu, r.rep, r.stream_hash) for r in runs]
        if hashes is None:
            hashes = h
        elif h != hashes:
            raise ExperimentError(f"arm {key!r} saw different streams")


def compare_estimators(config: ExperimentConfig, estimators: Sequence[EstimatorSpec]) -> dict:
    """One experiment per estimator on identical streams.

    Returns ``{label: (SummaryTable, runs)}`` in the given order.
    """
    results = {}
    for est in estimators:
        label = est.label()
        if label in results:
            raise ValueError(f"duplicate estimator {label}")
        results[label] = run_experiment(replace(config, estimator=est))
    _check_common_streams(results)
    return results


def batching_study(config: ExperimentConfig, intervals: Sequence[int]) -> dict:
    """One experiment per uniform batching interval on identical streams.

    Returns ``{interval: (SummaryTable, runs)}``.
    """
    results = {}
    for interval in intervals:
        if int(interval) < 1:
            raise ConfigError("interval", "must be a positive integer")
        cfg = replace(config, interval=int(interval), schedule=None)
        results[int(interval)] = run_experiment(cfg)
    _check_common_streams(results)
    return results


def write_outputs(table: SummaryTable, runs: Sequence[RunRecord], out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = out / "summary.csv"
    runs_path = out / "runs.csv"
    summary.write_text(table.to_csv())
    runs_path.write_text(runs_to_csv(runs))
    return summary, runs_path
