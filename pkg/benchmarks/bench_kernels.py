"""Benchmark the numba kernels against the pure-numpy fallback.

Run: python benchmarks/bench_kernels.py
Both backends are imported directly, so the TEALEAF_NUMBA env flag does not
matter here.
"""
import time

import numpy as np

from tealeaf.kernels import _numba, _numpy


def _time(fn, *args, repeats=30):
    fn(*args)  # warmup / jit compile
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        times.append((time.perf_counter() - start) * 1000.0)
    return float(np.mean(times)), float(np.std(times))


def main():
    rng = np.random.default_rng(0)
    big = rng.random((512, 512, 3), dtype=np.float32)
    img = rng.random((224, 224, 3), dtype=np.float32)

    cases = [
        ("resize 512->224", "bilinear_resize", (big, 224, 224)),
        ("rotate 224 (12 deg)", "affine_sample",
         (img, 0.9781476, -0.2079117, 0.2079117, 0.9781476)),
        ("zoom 224 (x1.1)", "affine_sample",
         (img, 1 / 1.1, 0.0, 0.0, 1 / 1.1)),
    ]

    print(f"{'kernel':<22} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for label, fn_name, args in cases:
        np_mean, np_std = _time(getattr(_numpy, fn_name), *args)
        nb_mean, nb_std = _time(getattr(_numba, fn_name), *args)
        out_np = getattr(_numpy, fn_name)(*args)
        out_nb = getattr(_numba, fn_name)(*args)
        max_diff = float(np.abs(out_np - out_nb).max())
        print(f"{label:<22} {np_mean:>7.2f}+-{np_std:<4.2f} "
              f"{nb_mean:>7.2f}+-{nb_std:<4.2f} {np_mean / nb_mean:>7.1f}x"
              f"   (max diff {max_diff:.2e})")


if __name__ == "__main__":
    main()
