"""KDE vs GMM2 vs ORACLE numerators on common random numbers.

    python scripts/run_estimator_comparison.py --mu 2 4 6 --reps 100

Each estimator sees exactly the same streams, so the differences in
rejection fraction reflect the predictor, not sampling noise.
"""

from pathlib import Path

from lctest.estimators import EstimatorSpec, Variant
from lctest.simlab import compare_estimators, write_outputs

from _common import base_parser, load_config, print_table


def main():
    p = base_parser(__doc__.splitlines()[0], "power_curve.json")
    p.add_argument("--mu", type=float, nargs="+", default=[2.0, 3.0, 4.0, 5.0, 6.0])
    args = p.parse_args()
    config = load_config(args, mu_values=args.mu)
    arms = [EstimatorSpec(Variant.KDE), EstimatorSpec(Variant.GMM2), EstimatorSpec(Variant.ORACLE)]
    results = compare_estimators(config, arms)
    last = config.checkpoints[-1]
    for label, (table, runs) in results.items():
        write_outputs(table, runs, Path(args.out_dir) / "estimators" / label.lower().replace("(", "_").rstrip(")"))
    rows = [[f"{mu:g}"] + [f"{table.fraction(mu, last):.2f}" for table, _ in results.values()]
            for mu in config.mu_values]
    print_table(rows, ["mu"] + list(results))


if __name__ == "__main__":
    main()
