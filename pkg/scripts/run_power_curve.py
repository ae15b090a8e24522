"""Rejection fraction versus mu at each checkpoint (KDE numerator, I = 20).

    python scripts/run_power_curve.py --reps 100 --workers 4

Writes summary.csv / runs.csv under --out-dir/power_curve and prints the
fraction table, one column per checkpoint.
"""

from pathlib import Path

from lctest.simlab import run_experiment, write_outputs

from _common import base_parser, load_config, print_table


def main():
    args = base_parser(__doc__.splitlines()[0], "power_curve.json").parse_args()
    config = load_config(args)
    table, runs = run_experiment(config)
    write_outputs(table, runs, Path(args.out_dir) / "power_curve")
    rows = [[f"{mu:g}"] + [f"{table.fraction(mu, c):.2f}" for c in config.checkpoints]
            for mu in config.mu_values]
    print_table(rows, ["mu"] + [f"t={c}" for c in config.checkpoints])


if __name__ == "__main__":
    main()
