"""Sweep the scaled path-count statistic across lattice scales.

Prints one row per n with the Monte-Carlo mean, its standard error,
the exact finite-n oracle (eligible sites times the DP tail), and the
z-score against that oracle.  The final column shows the drift toward
the limiting constant 1/sqrt(pi).
"""

import argparse
import math
import sys

from scheidegger.diagnostics import depth_tail_oracle, eta_estimate
from scheidegger.diagnostics import _eligible_sites
from scheidegger.rng import derive_seed


def parse_args(argv):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--n",
        type=lambda s: tuple(int(x) for x in s.split(",")),
        default=(25, 100, 400, 1600),
        help="comma-separated lattice scales",
    )
    parser.add_argument("--replicates", type=int, default=4000)
    parser.add_argument("--pad", type=float, default=6.0)
    parser.add_argument("--workers", type=int, default=1)
    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    limit = 1.0 / math.sqrt(math.pi)
    print(f"replicates={args.replicates} pad={args.pad} limit={limit:.6f}")
    print(f"{'n':>6} {'mean':>10} {'se':>9} {'oracle':>10} {'z':>7} {'mean-limit':>11}")
    for i, n in enumerate(args.n):
        est = eta_estimate(
            derive_seed(args.seed, i),
            n=n,
            replicates=args.replicates,
            pad=args.pad,
            workers=args.workers,
        )
        oracle = len(_eligible_sites(n)) * depth_tail_oracle(n)
        z = (est.mean - oracle) / est.se if est.se > 0 else float("inf")
        print(
            f"{n:>6} {est.mean:>10.5f} {est.se:>9.5f} {oracle:>10.5f} "
            f"{z:>+7.2f} {est.mean - limit:>+11.5f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
