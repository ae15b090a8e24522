"""Effect of the batching interval I on power, on common random numbers.

    python scripts/run_batching_study.py --intervals 1 10 20 50 --reps 100

Small I refits the log-concave MLE often (slow at I = 1); large I delays the
first scored batch and can only reject at multiples of I.
"""

from pathlib import Path

from lctest.simlab import batching_study, write_outputs

from _common import base_parser, load_config, print_table


def main():
    p = base_parser(__doc__.splitlines()[0], "power_curve.json")
    p.add_argument("--intervals", type=int, nargs="+", default=[1, 10, 20, 50])
    p.add_argument("--mu", type=float, nargs="+", default=[0.0, 4.0, 6.0, 8.0])
    args = p.parse_args()
    config = load_config(args, mu_values=args.mu)
    results = batching_study(config, args.intervals)
    last = config.checkpoints[-1]
    for interval, (table, runs) in results.items():
        write_outputs(table, runs, Path(args.out_dir) / "batching" / f"I{interval}")
    rows = [[f"{mu:g}"] + [f"{results[i][0].fraction(mu, last):.2f}" for i in args.intervals]
            for mu in config.mu_values]
    print_table(rows, ["mu"] + [f"I={i}" for i in args.intervals])


if __name__ == "__main__":
    main()
