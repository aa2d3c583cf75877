"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from twistlab import kernels


def best_of(fn, repeat):
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    X = np.abs(rng.standard_normal((2000, 48)))
    row = np.abs(rng.standard_normal(24))
    w = rng.uniform(0.5, 2.0, 48)
    om = rng.standard_normal((512, 48))
    lam = rng.standard_normal((512, 48))
    V = rng.standard_normal(48)
    return {
        "schreier_batch 2000x48": lambda impl: impl.schreier_batch(X),
        "schlumprecht_table N=24": lambda impl: impl.schlumprecht_table(row, 1e-10, 200),
        "rank_batch 2000x48": lambda impl: impl.rank_batch(X, w),
        "lp_residual_norms 512x48 p=2": lambda impl: impl.lp_residual_norms(om, lam, V, w, 2.0),
        "lp_residual_norms 512x48 p=3": lambda impl: impl.lp_residual_norms(om, lam, V, w, 3.0),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.HAS_NUMBA:
        print("numba is not installed; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        a = best_of(lambda: fn(kernels.numpy_impl), args.repeat)
        b = best_of(lambda: fn(kernels.numba_impl), args.repeat)
        print(f"{name:32s} {1e3 * a:11.3f} {1e3 * b:11.3f} {a / b:8.1f}x")


if __name__ == "__main__":
    main()
