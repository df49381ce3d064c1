"""Time TT point evaluation with the compiled and the numpy kernels.

Usage: python3 benchmarks/bench_kernels.py [--points N] [--repeat R]
"""
import argparse
import timeit

import numpy as np

from qttapprox import kernels
from qttapprox import tt as ttm
from qttapprox.tensorizer import EncodingParams

CASES = [  # (b, L, D, m, max_rank)
    (2, 10, 1, 1, 2),
    (2, 20, 1, 2, 3),
    (3, 6, 2, 1, 4),
    (2, 6, 3, 1, 8),
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    backends = ["numpy"] + (["cython"] if kernels.BACKEND == "cython" else [])
    print(f"default backend: {kernels.BACKEND}; {args.points} points, best of {args.repeat}")
    print(f"{'case':<22}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for b, L, D, m, r in CASES:
        f = ttm.random_tt(EncodingParams(b, L, D), m, rng=rng, max_rank=r)
        X = rng.random((args.points, D))
        times = {}
        for be in backends:
            ttm.evaluate_many(f, X[:10], backend=be)  # warm up
            times[be] = min(timeit.repeat(lambda: ttm.evaluate_many(f, X, backend=be),
                                          number=1, repeat=args.repeat))
        label = f"b={b} L={L} D={D} m={m} r<={r}"
        row = f"{label:<22}" + "".join(f"{times[be] * 1e3:>10.2f}ms" for be in backends)
        if "cython" in times:
            row += f"{times['numpy'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
