"""Compare finite-N stopping times of the rescaled chart with the Brownian limit.

Reports the KS distance for each N and drift, and the paired comparison of
two buffer strategies on shared limit paths.
"""
import argparse

from binchart import BufferStrategy, censor_at_one, ks_distance, sample_stopping, sample_tau1
from binchart.rng import DEFAULT_SEED, substream


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--xi", type=float, default=0.5, help="linear buffer fraction")
    ap.add_argument("--k", type=float, default=2.0)
    ap.add_argument("--G", type=int, default=4096)
    ap.add_argument("--paths", type=int, default=10_000)
    ap.add_argument("--N", type=int, nargs="+", default=[500, 2000])
    ap.add_argument("--theta", type=float, default=0.3)
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    args = ap.parse_args(argv)
    s = BufferStrategy.linear(args.xi)

    for b, delta in enumerate((0.0, 2.0)):
        lim = censor_at_one(sample_tau1(s, args.k, args.G, args.paths,
                                        substream(args.seed, b), delta, args.theta))
        for N in args.N:
            fin = sample_stopping(N, s, 0.5, delta, args.theta, args.k, args.paths,
                                  substream(args.seed, b, N))
            print(f"delta={delta} N={N}: KS {ks_distance(fin, lim):.4f}, "
                  f"mean finite {fin.mean():.4f} vs limit {lim.mean():.4f}")

    for delta in (2.0, 4.0):
        a = censor_at_one(sample_tau1(s, args.k, args.G, args.paths,
                                      substream(args.seed, 9, int(delta)), delta, args.theta))
        r = censor_at_one(sample_tau1(BufferStrategy.linear(1.0), args.k, args.G, args.paths,
                                      substream(args.seed, 9, int(delta)), delta, args.theta))
        d = r - a
        print(f"delta={delta}: mean tau1 xi={args.xi} {a.mean():.4f}, xi=1 {r.mean():.4f}, "
              f"difference {d.mean():.4f} +- {d.std(ddof=1) / len(d) ** 0.5:.4f}")


if __name__ == "__main__":
    main()
