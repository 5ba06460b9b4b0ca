"""Timing comparison of the numba kernels against their numpy fallbacks.

Run via `ivise bench`. The first numba call per kernel includes JIT
compilation, so every kernel gets one warmup call before timing.
"""

from __future__ import annotations

import time

import numpy as np

from .kernels import numpy_impl

_CASES = None


def _build_cases():
    rng = np.random.default_rng(11)
    frame = rng.integers(0, 256, (1080, 1920, 3), dtype=np.uint8).astype(np.uint8)
    small = rng.integers(0, 256, (160, 160, 3), dtype=np.uint8).astype(np.uint8)
    pixels = rng.integers(0, 256, (20000, 3)).astype(np.float64)
    centers = rng.integers(0, 256, (4, 3)).astype(np.float64)
    flat = np.repeat(rng.integers(0, 8, (600, 3)), 40, axis=0).astype(np.uint8)
    return {
        "box_blur3(160x160)": lambda impl: impl.box_blur3(small),
        "bilinear_resize(1080p->160)": lambda impl: impl.bilinear_resize(frame, 160, 160),
        "kmeans_assign(20k,k=4)": lambda impl: impl.kmeans_assign(pixels, centers),
        "rle_encode_runs(24k)": lambda impl: impl.rle_encode_runs(flat),
        "triangle_interior(300px)": lambda impl: impl.triangle_interior(
            10.0, 10.0, 290.0, 40.0, 150.0, 280.0, 0, 299, 0, 299),
    }


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best * 1000.0


def run_benchmarks(repeats: int = 5) -> list[tuple[str, float, float]]:
    try:
        from .kernels import numba_impl
    except ImportError:
        numba_impl = None

    cases = _build_cases()
    rows = []
    print(f"{'kernel':36s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, call in cases.items():
        np_ms = _time(lambda: call(numpy_impl), repeats)
        if numba_impl is not None:
            call(numba_impl)  # warmup / compile
            nb_ms = _time(lambda: call(numba_impl), repeats)
            speed = np_ms / nb_ms if nb_ms > 0 else float("inf")
            print(f"{name:36s} {np_ms:10.3f} {nb_ms:10.3f} {speed:7.1f}x")
        else:
            nb_ms = float("nan")
            print(f"{name:36s} {np_ms:10.3f} {'n/a':>10s} {'-':>8s}")
        rows.append((name, np_ms, nb_ms))
    return rows
