"""Marginal-gain evaluations of lazy versus naive greedy selection.

    python3 scripts/lazy_vs_naive.py --sizes 10 50 200 500
"""

import argparse
import time

import numpy as np

from loadcluster import bench, submodular


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 50, 200, 500])
    ap.add_argument("--k", type=int, default=None, help="centers to select (default: N)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'N':>5} {'k':>5} {'naive evals':>12} {'lazy evals':>11} {'ratio':>6} {'same order':>11} {'speedup':>8}")
    for n in args.sizes:
        w = bench.random_kernel(n, np.random.default_rng(args.seed), dim=5)
        k = min(args.k or n, n)
        t0 = time.perf_counter()
        naive = submodular.naive_greedy_select(w, k)
        t1 = time.perf_counter()
        lazy = submodular.lazy_greedy_select(w, k)
        t2 = time.perf_counter()
        print(f"{n:>5} {k:>5} {naive.evaluations:>12} {lazy.evaluations:>11} "
              f"{lazy.evaluations / naive.evaluations:>6.3f} {str(lazy.order == naive.order):>11} "
              f"{(t1 - t0) / (t2 - t1):>7.1f}x")


if __name__ == "__main__":
    main()
