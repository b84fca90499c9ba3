"""Timing comparison of the compiled kernels against their numpy fallbacks.

Run: python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from autoclip import _kernels


def bench(label, fn, *args, repeat=20):
    fn(*args)  # warm up (triggers compilation on the jit path)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    dt = (time.perf_counter() - t0) / repeat
    print(f"{label:32s} {dt * 1e3:10.3f} ms")
    return dt


def main():
    rng = np.random.default_rng(0)
    grads = rng.standard_normal((4096, 512))
    weights = rng.random(4096)
    X = rng.standard_normal((4096, 512))
    y = np.where(rng.random(4096) < 0.5, -1.0, 1.0)
    w = rng.standard_normal(512)

    print(f"kernel backend compiled: {_kernels.USING_NUMBA}\n")
    pairs = [
        ("row_norms", _kernels.row_norms, _kernels._np_row_norms, (grads,)),
        ("weighted_row_sum", _kernels.weighted_row_sum,
         _kernels._np_weighted_row_sum, (grads, weights)),
        ("logistic_grads", _kernels.logistic_grads,
         _kernels._np_logistic_grads, (X, y, w)),
    ]
    for name, fast, slow, args in pairs:
        t_fast = bench(f"{name} (selected)", fast, *args)
        t_slow = bench(f"{name} (numpy fallback)", slow, *args)
        print(f"{'speedup':32s} {t_slow / t_fast:10.2f}x\n")


if __name__ == "__main__":
    main()
