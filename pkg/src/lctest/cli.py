"""Command-line front end: ``fit``, ``test`` and ``simulate``.

Exit codes: 0 success, 2 usage or parse error, 3 degenerate data,
4 internal numeric failure.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import sys
from typing import Iterator, TextIO

from .eprocess import BatchSchedule, EstimatorContractError, eprocess_step, EProcessState, log_threshold
from .estimators import EstimatorSpec
from .lcmle import DEFAULT_TOL, DegenerateSampleError, fit_lcmle
from .simlab import ConfigError, ExperimentConfig, ExperimentError, fmt, run_experiment, write_outputs

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE, EXIT_NUMERIC = 0, 2, 3, 4


class InputError(ValueError):
    pass


def iter_values(fh: TextIO) -> Iterator[float]:
    """One decimal per line; blank lines and ``#`` comments are skipped."""
    for lineno, line in enumerate(fh, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            val = float(text)
        except ValueError:
            raise InputError(f"line {lineno}: cannot parse {text!r} as a number") from None
        if not math.isfinite(val):
            raise InputError(f"line {lineno}: non-finite value {text!r}")
        yield val


def _open_input(path: str | None):
    if path in (None, "-"):
        return contextlib.nullcontext(sys.stdin)
    return open(path)


def cmd_fit(args, out: TextIO) -> int:
    with _open_input(args.input) as fh:
        values = list(iter_values(fh))
    try:
        report = fit_lcmle(values, tol=args.tol)
    except DegenerateSampleError as exc:
        print(f"error: degenerate sample: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    json.dump(report.to_dict(), out)
    out.write("\n")
    return EXIT_OK


def cmd_test(args, out: TextIO) -> int:
    if not (0.0 < args.alpha <= 1.0):
        print("error: --alpha must lie in (0, 1]", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.schedule:
            schedule = BatchSchedule.parse(args.schedule)
        else:
            schedule = BatchSchedule.uniform(args.interval or 20)
        estimator = EstimatorSpec.parse(args.estimator)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    thr = log_threshold(args.alpha)

    out.write("t,log_R,rejected\n")
    state = EProcessState()
    tau = None
    with _open_input(args.input) as fh:
        for x in iter_values(fh):
            before = len(state.trace)
            state = eprocess_step(state, x, schedule, estimator, args.mle_tol)
            if len(state.trace) > before:
                rejected = state.log_R >= thr
                out.write(f"{state.t},{fmt(state.log_R)},{str(rejected).lower()}\n")
                if rejected:
                    tau = state.t
                    break
    json.dump({"rejected": tau is not None, "tau": tau}, out)
    out.write("\n")
    return EXIT_OK


def cmd_simulate(args, out: TextIO) -> int:
    try:
        with open(args.config) as fh:
            config = ExperimentConfig.from_json(fh.read())
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ValueError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.workers:
        config = ExperimentConfig(**{**config.__dict__, "workers": args.workers})
    table, runs = run_experiment(config)
    write_outputs(table, runs, args.out_dir)
    last = config.checkpoints[-1]
    for mu in config.mu_values:
        frac = table.fraction(mu, last)
        out.write(f"mu={fmt(mu)} reps={config.reps} rejection_fraction@{last}={fmt(frac)}\n")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lctest", description="Sequential test for log-concavity.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit the log-concave MLE and print it as JSON")
    f.add_argument("input", nargs="?", help="file with one value per line (default stdin)")
    f.add_argument("--tol", type=float, default=DEFAULT_TOL)
    f.set_defaults(func=cmd_fit)

    t = sub.add_parser("test", help="run the sequential test on a data stream")
    t.add_argument("input", nargs="?", help="file with one value per line (default stdin)")
    t.add_argument("--alpha", type=float, default=0.1)
    g = t.add_mutually_exclusive_group()
    g.add_argument("--interval", type=int, help="uniform batching interval I (default 20)")
    g.add_argument("--schedule", help='explicit batch times, e.g. "20,40,80"')
    t.add_argument("--estimator", default="kde",
                   help="kde | kde:silverman | kde:<h> | gmm2 | oracle:<mu>")
    t.add_argument("--mle-tol", type=float, default=DEFAULT_TOL)
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="run a Monte-Carlo experiment from a JSON config")
    s.add_argument("config")
    s.add_argument("--out-dir", default=".")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None, out: TextIO | None = None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateSampleError as exc:
        print(f"error: degenerate sample: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (EstimatorContractError, ExperimentError, FloatingPointError, ArithmeticError) as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
