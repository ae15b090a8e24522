"""sigma_n = sum log p(X_i) - log phat(X_i) for the truth p and the
log-concave MLE phat, across mu.  Positive values mean the MLE cannot
explain the data as well as the truth does, the signal the test exploits.

    python scripts/run_sigma_diagnostic.py --n 500 --reps 20
"""

import argparse

import numpy as np

from lctest.density import GaussianMixture1D, derive_seed, sample_mixture
from lctest.eprocess import sigma_diagnostic

from _common import print_table


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--mu", type=float, nargs="+", default=[0, 2, 3, 4, 6, 8])
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--base-seed", type=int, default=0)
    args = p.parse_args()
    rows = []
    for mu in args.mu:
        vals = [sigma_diagnostic(GaussianMixture1D(mu),
                                 sample_mixture(mu, args.n, derive_seed(args.base_seed, mu, r)))
                for r in range(args.reps)]
        rows.append([f"{mu:g}", f"{np.median(vals):.3f}", f"{np.median(vals) / args.n:.4f}",
                     f"{np.mean(np.array(vals) > 0):.2f}"])
    print_table(rows, ["mu", "median sigma", "median sigma/n", "frac > 0"])


if __name__ == "__main__":
    main()
