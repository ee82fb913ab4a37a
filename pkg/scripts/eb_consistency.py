"""Sup-error of the sample-only estimates against n, with medians and slope.

    python scripts/eb_consistency.py [--kind moment|cumulant] [--relaxed]
"""

import argparse
import time

from cme.channel import ScalarChannel, two_point
from cme.empirical_bayes import consistency_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--kind", choices=["moment", "cumulant"], default="moment")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--n", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--u", type=float, default=0.1)
    p.add_argument("--w", type=float, default=0.05)
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--relaxed", action="store_true", help="run even when the Lanczos step exceeds t_n/2")
    args = p.parse_args()

    ch = ScalarChannel(two_point(0.5), 1.0)
    t0 = time.perf_counter()
    res = consistency_experiment(
        ch, args.k, args.n, range(args.seeds), args.u, args.w,
        kind=args.kind, grid_points=args.points, strict=not args.relaxed,
    )
    print(f"{'n':>8} {'q10':>10} {'median':>10} {'q90':>10}")
    for n, q in res.quantiles().items():
        print(f"{n:>8} {q[0]:10.5f} {q[1]:10.5f} {q[2]:10.5f}")
    print(f"slope {res.slope():.4f}  strictly decreasing: {res.strictly_decreasing()}")
    if not all(r.admissible for r in res.rows):
        print("note: some runs used h > t_n/2")
    print(f"{time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
