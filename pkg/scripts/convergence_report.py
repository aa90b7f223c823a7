"""Compare conditioned discrete trees against continuum skeletons.

Runs the scale-comparison diagnostic and prints the five KS rows per
lattice scale plus how many statistics shrank from the first scale to
the last.  Defaults are sized for a coffee-break run on one core;
--replicates 1500 reproduces the full diagnostic.
"""

import argparse
import sys

from scheidegger.diagnostics import converge


def parse_args(argv):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--n",
        type=lambda s: tuple(int(x) for x in s.split(",")),
        default=(100, 400),
        help="comma-separated lattice scales, compared first to last",
    )
    parser.add_argument("--replicates", type=int, default=300)
    parser.add_argument("--points", type=int, default=8)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--json", help="also write the full report to this path")
    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    report = converge(
        args.seed,
        n_values=args.n,
        replicates=args.replicates,
        points=args.points,
        workers=args.workers,
    )
    print(f"replicates={args.replicates} continuum={report.continuum_size}")
    for n in report.n_values:
        print(f"n={n}")
        for row in report.reports[n].rows:
            print(f"  {row.name:<14} ks={row.statistic:.4f} p={row.pvalue:.4f}")
    print(f"decreased {report.decreased()}/5 from n={report.n_values[0]} to n={report.n_values[-1]}")
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(report.to_json())
            fh.write("\n")
        print(f"wrote {args.json}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
