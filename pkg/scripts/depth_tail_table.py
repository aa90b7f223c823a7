"""Tabulate cluster depth tails: Monte Carlo against the exact DP.

Also prints the normalized tail P(L >= n) * sqrt(pi * n), which
approaches 2 as n grows; the DP column is exact, so the z-scores are
a pure check of the simulator.
"""

import argparse
import math
import sys

from scheidegger.diagnostics import depth_tail_mc


def parse_args(argv):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--n",
        type=lambda s: tuple(int(x) for x in s.split(",")),
        default=(4, 16, 64, 256),
        help="comma-separated tail levels",
    )
    parser.add_argument("--replicates", type=int, default=4000)
    parser.add_argument("--workers", type=int, default=1)
    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    rows = depth_tail_mc(
        args.seed, list(args.n), args.replicates, workers=args.workers
    )
    print(f"replicates={args.replicates}")
    print(f"{'n':>6} {'mc':>9} {'se':>9} {'dp':>9} {'z':>7} {'dp*sqrt(pi*n)':>14}")
    for row in rows:
        scaled = row.oracle * math.sqrt(math.pi * row.n)
        print(
            f"{row.n:>6} {row.estimate:>9.5f} {row.se:>9.5f} "
            f"{row.oracle:>9.5f} {row.z:>+7.2f} {scaled:>14.5f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
