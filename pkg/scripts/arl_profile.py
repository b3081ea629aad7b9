"""Log in-control ARL against the threshold k for several buffer lengths.

Prints ``M,k,log_arl0`` rows to stdout (or ``--out``); the plateaus in k come
from the integer-valued count statistic.
"""
import argparse
import csv
import sys

import numpy as np

from binchart import SimConfig, log_arl_profile


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, nargs="+", default=[12, 23, 28, 71, 150])
    ap.add_argument("--k-min", type=float, default=1.0)
    ap.add_argument("--k-max", type=float, default=3.0)
    ap.add_argument("--k-step", type=float, default=0.05)
    ap.add_argument("--runs", type=int, default=5_000)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)
    ks = np.round(np.arange(args.k_min, args.k_max + 1e-9, args.k_step), 4)
    table = log_arl_profile(args.M, ks, sim=SimConfig(n_runs=args.runs))
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    with fh:
        w = csv.writer(fh)
        w.writerow(["M", "k", "log_arl0"])
        w.writerows(table)


if __name__ == "__main__":
    main()
