"""Time the numba and numpy kernel backends on the hot paths.

    python3 benchmarks/bench_kernels.py [--n 1000] [--repeat 5]

Reports the best-of-``repeat`` wall time per operation and the speed-up.
The numba kernels are compiled (or loaded from cache) before timing.
"""
import argparse
import timeit

import numpy as np

from locnoise import _numba_kernels as nb
from locnoise import _numpy_kernels as npk

ARGS = (50, 1e-8, 1e-10, 30, 30.0)


def make_problem(n, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    y = (rng.random(n) < 1 / (1 + np.exp(-X[:, 0] * X[:, 1]))).astype(float)
    return X, y


def operations(mod, X, y):
    x0 = np.array([0.3, -0.2])
    x1 = np.array([-0.5, 0.4])
    A = mod.design_matrix(X, x0, 1)
    Aj = mod.design_matrix(X, x1, 1)
    w = mod.gaussian_weights(X, x0, 0.8)
    wj = mod.gaussian_weights(X, x1, 0.8)
    beta = npk.newton_logistic(A, y, w, *ARGS)[0]
    bj = npk.newton_logistic(Aj, y, wj, *ARGS)[0]
    idx = np.arange(0, len(y), max(1, len(y) // 100))
    return {
        "design+weights": lambda: (mod.design_matrix(X, x0, 1), mod.gaussian_weights(X, x0, 0.8)),
        "newton fit": lambda: mod.newton_logistic(A, y, w, *ARGS),
        "sandwich parts": lambda: mod.sandwich_parts(A, y, w, beta),
        "cross meat": lambda: mod.cross_meat(A, Aj, y, w, wj, beta, bj),
        f"loo fits ({len(idx)})": lambda: mod.loo_fits(X, y, idx, 0.8, 1, *ARGS),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    X, y = make_problem(args.n)
    ops_nb = operations(nb, X, y)
    ops_np = operations(npk, X, y)
    for f in ops_nb.values():
        f()  # compile
    print(f"n={args.n}, best of {args.repeat}")
    print(f"{'operation':<20}{'numba [ms]':>12}{'numpy [ms]':>12}{'speed-up':>10}")
    for name in ops_nb:
        t_nb = min(timeit.repeat(ops_nb[name], number=1, repeat=args.repeat)) * 1e3
        t_np = min(timeit.repeat(ops_np[name], number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<20}{t_nb:>12.3f}{t_np:>12.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
