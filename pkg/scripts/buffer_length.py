"""Out-of-control ARL against buffer length, each chart calibrated to ARL0 435.

For every jump the buffer length with the smallest ARL is marked, which is how
the optimal M for a given shift size is read off.
"""
import argparse
import csv
import sys

from binchart import SimConfig, calibrate_k, estimate_arl
from binchart.design import UnreachableError


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, nargs="+", default=[12, 23, 28, 71, 90, 150, 212, 441])
    ap.add_argument("--jumps", type=float, nargs="+", default=[0.25, 0.5, 0.75])
    ap.add_argument("--runs", type=int, default=10_000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)
    sim = SimConfig(n_runs=args.runs, workers=args.workers)

    designs = {}
    for M in args.M:
        try:
            designs[M] = calibrate_k(M, sim=sim)
        except UnreachableError:
            print(f"M={M}: target unreachable, skipped", file=sys.stderr)
    rows = []
    for j, m in enumerate(args.jumps):
        arls = {M: estimate_arl(M, d.k, jump=m, sim=sim, stream=(j, M)).mean_rl
                for M, d in designs.items()}
        best = min(arls, key=arls.get)
        rows += [(m, M, designs[M].k, round(a, 3), M == best) for M, a in arls.items()]
    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    with fh:
        w = csv.writer(fh)
        w.writerow(["jump", "M", "k", "arl", "best"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
