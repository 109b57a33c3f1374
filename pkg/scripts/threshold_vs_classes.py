#!/usr/bin/env python3
"""Tabulate the misclassified-case admissibility threshold against class count.

Writes threshold.csv into the output directory.
"""

import argparse
import sys

from logitlab import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/threshold")
    ap.add_argument("--n-classes", type=int, default=40,
                    help="largest class count to scan (starting at 4)")
    ap.add_argument("--branch", choices=("plus", "minus"), default="plus")
    args = ap.parse_args()
    return cli.main([
        "analytic", "--threshold",
        "--n-classes", str(args.n_classes),
        "--branch", args.branch,
        "--out", args.out,
    ])


if __name__ == "__main__":
    sys.exit(main())
