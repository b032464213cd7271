"""Time the numba loop kernels against the vectorised numpy kernels.

    python3 benchmarks/bench_dense.py [--sizes 4 8 16 32 64] [--repeat 5]

Prints one CSV row per (routine, n) with the best-of-``repeat`` wall time in
microseconds for each kernel family and their ratio. The first call of each
numba kernel is excluded (compilation). The matrix exponential is timed as
a reference point: it only uses matrix products, so it runs the same under
either kernel family.
"""
import argparse
import timeit

import numpy as np

from trivopt import backend, dense
from trivopt.expm import expm
from trivopt.manifolds import frame_skew


def routines(rng, n):
    M = rng.standard_normal((n, n))
    S = dense.sym(M + M.T)
    b = rng.standard_normal(n)
    return {
        "qr": lambda k: dense.qr(M, kernels=k),
        "sym_eig": lambda k: dense.sym_eig(S, kernels=k),
        "svd": lambda k: dense.svd(M, kernels=k),
        "solve": lambda k: dense.solve(M, b, kernels=k),
    }


def best_us(fn, repeat):
    fn()
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
    return 1e6 * min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[4, 8, 16, 32, 64])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"# backend={backend()}")
    print("routine,n,loops_us,numpy_us,numpy_over_loops")
    for n in args.sizes:
        for name, fn in routines(rng, n).items():
            loops = best_us(lambda: fn("loops"), args.repeat)
            vec = best_us(lambda: fn("numpy"), args.repeat)
            print(f"{name},{n},{loops:.1f},{vec:.1f},{vec / loops:.2f}")
    for n in args.sizes:
        A = frame_skew(rng.standard_normal((n, n)))
        print(f"expm,{n},{best_us(lambda: expm(A), args.repeat):.1f},,")


if __name__ == "__main__":
    main()
