#!/usr/bin/env python3
"""Time every kernel on its numba loop path and its numpy path.

Shapes follow the MNIST experiments: T images of 28x28, rank L, K classes.
The first call of each numba kernel is a warm-up (compilation / cache load)
and is not timed.

    python benchmarks/bench_kernels.py [-T 2000] [-L 3] [-r 5]
"""

import argparse
import time

import numpy as np

from bilinreg import _accel
from bilinreg.kernels import IMPLEMENTATIONS


def cases(T, L, K, rng):
    X = rng.uniform(0, 1, (T, 28, 28))
    A = rng.normal(size=(28, L))
    B = rng.normal(size=(28, L))
    W = rng.normal(size=(28, 28))
    r = rng.normal(size=T)
    G = rng.normal(size=(28, 28))
    P = rng.normal(size=(28, K))
    return {
        "bilinear_scores": lambda f: f(X, A, B),
        "frobenius_scores": lambda f: f(X, W),
        "right_project": lambda f: f(X, P),
        "left_project": lambda f: f(X, P),
        "weighted_sum": lambda f: f(r, X),
        "jacobi_sweeps": lambda f: f(G.copy(), np.eye(28), 1e-15, 60),
    }


def best_of(call, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        call()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("-T", type=int, default=2000, help="images per batch")
    p.add_argument("-L", type=int, default=3, help="rank")
    p.add_argument("-K", type=int, default=10, help="columns projected at once (classes)")
    p.add_argument("-r", "--repeats", type=int, default=5)
    p.add_argument("-s", "--seed", type=int, default=0)
    args = p.parse_args()

    if not _accel.HAVE_NUMBA:
        print("numba is not installed; the loop path runs as plain python and is not timed")
    print(f"active backend: {_accel.backend_name()}  T={args.T} L={args.L} K={args.K}")
    print(f"{'kernel':<18}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}{'max |diff|':>14}")

    for name, run in cases(args.T, args.L, args.K, np.random.default_rng(args.seed)).items():
        loops, vec = IMPLEMENTATIONS[name]
        ref = run(vec)
        if _accel.HAVE_NUMBA:
            out = run(loops)  # warm-up
            diff = np.max(np.abs(np.asarray(out, dtype=float) - np.asarray(ref, dtype=float)))
            t_loop = best_of(lambda: run(loops), args.repeats)
        else:
            diff, t_loop = float("nan"), float("nan")
        t_vec = best_of(lambda: run(vec), args.repeats)
        print(f"{name:<18}{t_loop * 1e3:>12.3f}{t_vec * 1e3:>12.3f}{t_vec / t_loop:>10.2f}{diff:>14.2e}")


if __name__ == "__main__":
    main()
