"""Benchmark the numba-compiled kernels against their pure-Python fallbacks.

Run:  python benchmarks/bench_kernels.py [--strokes 400] [--hashes 50]

The same comparison is what the SKETCHLM_NUMBA=0 env flag switches at import
time; this script times both paths side by side in one process.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sketchlm import kernels
from sketchlm.canvas import blank_canvas


def random_polylines(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        k = int(rng.integers(2, 14))
        out.append((
            rng.integers(0, 256, k).astype(np.int64),
            rng.integers(0, 256, k).astype(np.int64),
            int(rng.integers(1, 3)),
        ))
    return out


def time_paint(fn, polylines, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        img = blank_canvas()
        t0 = time.perf_counter()
        for xs, ys, w in polylines:
            fn(img, xs, ys, 0, 0, 0, w)
        best = min(best, time.perf_counter() - t0)
    return best


def time_hash(fn, buffers, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for buf in buffers:
            fn(buf)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--strokes", type=int, default=400)
    ap.add_argument("--hashes", type=int, default=50)
    args = ap.parse_args()

    if not kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not importable; nothing to compare")

    polylines = random_polylines(args.strokes)
    buffers = [np.random.default_rng(i).integers(0, 256, 196608).astype(np.uint8)
               for i in range(args.hashes)]

    # trigger compilation outside the timed region
    img = blank_canvas()
    kernels.paint_polyline_jit(img, *polylines[0][:2], 0, 0, 0, 1)
    kernels.fnv1a64_jit(buffers[0])

    rows = []
    t_py = time_paint(kernels.paint_polyline_py, polylines)
    t_jit = time_paint(kernels.paint_polyline_jit, polylines)
    rows.append(("paint_polyline", args.strokes, t_py, t_jit))

    h_py = time_hash(kernels.fnv1a64_py, buffers)
    h_jit = time_hash(kernels.fnv1a64_jit, buffers)
    rows.append(("fnv1a64", args.hashes, h_py, h_jit))

    print(f"{'kernel':<16}{'calls':>7}{'python':>12}{'numba':>12}{'speedup':>9}")
    for name, calls, py, jit in rows:
        print(f"{name:<16}{calls:>7}{py:>11.4f}s{jit:>11.4f}s{py / jit:>8.1f}x")

    # both paths must agree bit for bit
    a, b = blank_canvas(), blank_canvas()
    for xs, ys, w in polylines[:50]:
        kernels.paint_polyline_py(a, xs, ys, 10, 20, 30, w)
        kernels.paint_polyline_jit(b, xs, ys, 10, 20, 30, w)
    assert (a == b).all(), "paint kernels diverged"
    assert all(int(kernels.fnv1a64_py(buf)) == int(kernels.fnv1a64_jit(buf))
               for buf in buffers[:5]), "hash kernels diverged"
    print("agreement check: identical outputs on both paths")


if __name__ == "__main__":
    main()
