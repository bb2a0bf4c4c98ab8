"""Benchmark the compiled kernel core against the numpy fallback.

Usage:  python benchmarks/bench_kernels.py [--repeat 3]

Measures the two hot kernels at the paper-scale working size
(16 x 112 x 112 video, ~200 SLIC clusters) plus one end-to-end blur.
"""

import argparse
import math
import time

import numpy as np

from revex._kernels import _numpy as numpy_backend

try:
    from revex._kernels import _core as cython_backend
except ImportError:
    cython_backend = None


def timeit(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_correlate(backend, repeat):
    rng = np.random.default_rng(0)
    # one spatial pass of the default removal blur at 16x112x112x3
    x = rng.random((16 * 112, 112, 3), dtype=np.float32)
    k = np.exp(-0.5 * (np.arange(-20, 21) / 10.0) ** 2)
    k /= k.sum()
    return timeit(lambda: backend.correlate1d_3d(x, k), repeat)


def bench_slic_assign(backend, repeat):
    rng = np.random.default_rng(1)
    feat = rng.random((16, 112, 112, 3), dtype=np.float32).astype(np.float32)
    k = 216
    centers_pos = rng.random((k, 3)) * [112.0, 112.0, 112.0]
    centers_feat = rng.random((k, 3))
    return timeit(lambda: backend.slic_assign(feat, 7.0, centers_pos,
                                              centers_feat, 1.0, (3, 20, 20)),
                  repeat)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    backends = [("numpy", numpy_backend)]
    if cython_backend is not None:
        backends.append(("cython", cython_backend))
    else:
        print("compiled core not built; run "
              "`python setup_cython.py build_ext --inplace` to compare\n")

    rows = []
    for name, backend in backends:
        rows.append((name,
                     bench_correlate(backend, args.repeat),
                     bench_slic_assign(backend, args.repeat)))

    print(f"{'backend':<10} {'correlate1d (s)':>16} {'slic_assign (s)':>16}")
    for name, tc, ts in rows:
        print(f"{name:<10} {tc:>16.4f} {ts:>16.4f}")
    if len(rows) == 2:
        print(f"{'speedup':<10} {rows[0][1] / rows[1][1]:>15.1f}x "
              f"{rows[0][2] / rows[1][2]:>15.1f}x")


if __name__ == "__main__":
    main()
