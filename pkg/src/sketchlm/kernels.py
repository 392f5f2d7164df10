"""Hot per-pixel kernels: polyline painting and canvas hashing.

Both kernels are written once as plain Python loops and compiled with
numba's @njit when available.  Set SKETCHLM_NUMBA=0 to force the
uncompiled pure-Python path (same code, same results, just slower);
`benchmarks/bench_kernels.py` measures the difference.
"""

from __future__ import annotations

import os

import numpy as np

NUMBA_ENV_FLAG = "SKETCHLM_NUMBA"


def _paint_polyline(img, xs, ys, r, g, b, width):
    """Paint an integer Bresenham polyline onto img in place.

    img is (256, 256, 3) uint8; xs/ys are matching int64 coordinate arrays.
    Width w paints a w*w block anchored top-left at every line pixel, so the
    width-1 pixel set is always covered by the width-2 set of the same
    polyline (this is what makes white redraw an exact eraser).  Ties where
    the line passes exactly between two pixels step both axes in the same
    iteration (the classic error-accumulation rule).
    """
    h = img.shape[0]
    w_img = img.shape[1]
    n = xs.shape[0]
    nseg = n - 1
    if nseg < 1:
        nseg = 1
    for k in range(nseg):
        x0 = xs[k]
        y0 = ys[k]
        if n > 1:
            x1 = xs[k + 1]
            y1 = ys[k + 1]
        else:
            x1 = x0
            y1 = y0
        dx = x1 - x0
        if dx < 0:
            dx = -dx
        sx = 1 if x0 < x1 else -1
        dy = y0 - y1
        if dy > 0:
            dy = -dy
        sy = 1 if y0 < y1 else -1
        err = dx + dy
        x = x0
        y = y0
        while True:
            for oy in range(width):
                py = y + oy
                if 0 <= py < h:
                    for ox in range(width):
                        px = x + ox
                        if 0 <= px < w_img:
                            img[py, px, 0] = r
                            img[py, px, 1] = g
                            img[py, px, 2] = b
            if x == x1 and y == y1:
                break
            e2 = 2 * err
            if e2 >= dy:
                err += dy
                x += sx
            if e2 <= dx:
                err += dx
                y += sy


def _fnv1a64(data):
    """64-bit FNV-1a over a contiguous uint8 array (numba source form)."""
    h = np.uint64(0xCBF29CE484222325)
    prime = np.uint64(0x100000001B3)
    for i in range(data.shape[0]):
        h = (h ^ np.uint64(data[i])) * prime
    return h


def _fnv1a64_py(data):
    # numpy scalar uint64 multiplication warns on overflow outside numba,
    # so the interpreted fallback runs on masked Python ints instead.
    h = 0xCBF29CE484222325
    for byte in data.tobytes():
        h = ((h ^ byte) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return np.uint64(h)


def numba_requested() -> bool:
    return os.environ.get(NUMBA_ENV_FLAG, "1") != "0"


paint_polyline_py = _paint_polyline
fnv1a64_py = _fnv1a64_py

try:
    from numba import njit

    paint_polyline_jit = njit(cache=True)(_paint_polyline)
    fnv1a64_jit = njit(cache=True)(_fnv1a64)
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a hard dependency, but stay runnable
    paint_polyline_jit = None
    fnv1a64_jit = None
    NUMBA_AVAILABLE = False

NUMBA_ACTIVE = NUMBA_AVAILABLE and numba_requested()

if NUMBA_ACTIVE:
    paint_polyline = paint_polyline_jit
    fnv1a64 = fnv1a64_jit
else:
    paint_polyline = paint_polyline_py
    fnv1a64 = fnv1a64_py
