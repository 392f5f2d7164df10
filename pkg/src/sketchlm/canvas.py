"""Deterministic 256x256 RGB canvas: rasterization, geometry, pixel metrics.

A canvas is a plain (256, 256, 3) uint8 numpy array, white when blank.
All functions here are pure (apply_stroke copies); paint_stroke_inplace is
the documented single-writer mutating variant used by hot loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .codec import CANVAS_SIZE, Point, Stroke

Canvas = np.ndarray  # (256, 256, 3) uint8

PSNR_CAP_DB = 99.0
_CHANNEL_COUNT = CANVAS_SIZE * CANVAS_SIZE * 3


class CanvasError(ValueError):
    pass


class EmptyStrokes(CanvasError):
    pass


class MalformedPPM(CanvasError):
    pass


def blank_canvas() -> Canvas:
    return np.full((CANVAS_SIZE, CANVAS_SIZE, 3), 255, np.uint8)


def paint_stroke_inplace(c: Canvas, s: Stroke) -> None:
    """Mutating rasterizer; single writer per canvas."""
    xs = np.fromiter((p.x for p in s.points), np.int64, len(s.points))
    ys = np.fromiter((p.y for p in s.points), np.int64, len(s.points))
    kernels.paint_polyline(c, xs, ys, s.color.r, s.color.g, s.color.b, s.width)


def apply_stroke(c: Canvas, s: Stroke) -> Canvas:
    out = c.copy()
    paint_stroke_inplace(out, s)
    return out


def apply_strokes(c: Canvas, strokes: Iterable[Stroke]) -> Canvas:
    out = c.copy()
    for s in strokes:
        paint_stroke_inplace(out, s)
    return out


def render_strokes(strokes: Iterable[Stroke]) -> Canvas:
    return apply_strokes(blank_canvas(), strokes)


def canvas_hash(c: Canvas) -> int:
    """64-bit FNV-1a over the raw row-major RGB bytes."""
    return int(kernels.fnv1a64(np.ascontiguousarray(c).reshape(-1)))


def mse(a: Canvas, b: Canvas) -> float:
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(d * d))


def psnr(a: Canvas, b: Canvas) -> float:
    """10*log10(255^2 / mse), capped at 99.0 dB (identical canvases hit the cap)."""
    m = mse(a, b)
    if m == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(255.0 * 255.0 / m))


@dataclass(frozen=True)
class BBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0 or self.w < 1 or self.h < 1:
            raise ValueError(f"degenerate bbox {self}")
        if self.x + self.w > CANVAS_SIZE or self.y + self.h > CANVAS_SIZE:
            raise ValueError(f"bbox exceeds canvas: {self}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + (self.w - 1) / 2.0, self.y + (self.h - 1) / 2.0)

    def iou(self, other: "BBox") -> float:
        ix = max(0, min(self.x + self.w, other.x + other.w) - max(self.x, other.x))
        iy = max(0, min(self.y + self.h, other.y + other.h) - max(self.y, other.y))
        inter = ix * iy
        union = self.w * self.h + other.w * other.h - inter
        return inter / union if union else 0.0


def bounding_box(strokes: Sequence[Stroke]) -> BBox:
    """Tight axis-aligned box over every point of every stroke."""
    if not strokes or not any(s.points for s in strokes):
        raise EmptyStrokes("no points to bound")
    xs = [p.x for s in strokes for p in s.points]
    ys = [p.y for s in strokes for p in s.points]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    return BBox(x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def _round_half_up(v: float) -> int:
    return math.floor(v + 0.5)


def scale_strokes_to_bbox(strokes: Sequence[Stroke], target: BBox) -> tuple[Stroke, ...]:
    """Affine-map the strokes' tight bounding box onto target.

    Independent x/y scales; a degenerate source extent (single column/row)
    collapses onto the target's start edge.  Output coordinates are rounded
    half-up and clamped to the canvas.
    """
    src = bounding_box(strokes)
    sx = (target.w - 1) / (src.w - 1) if src.w > 1 else 0.0
    sy = (target.h - 1) / (src.h - 1) if src.h > 1 else 0.0

    def map_point(p: Point) -> Point:
        nx = _round_half_up(target.x + (p.x - src.x) * sx)
        ny = _round_half_up(target.y + (p.y - src.y) * sy)
        return Point(min(max(nx, 0), CANVAS_SIZE - 1), min(max(ny, 0), CANVAS_SIZE - 1))

    return tuple(
        Stroke(s.color, s.width, tuple(map_point(p) for p in s.points)) for s in strokes
    )


_PPM_HEADER = b"P6\n256 256\n255\n"


def encode_ppm(c: Canvas) -> bytes:
    return _PPM_HEADER + np.ascontiguousarray(c, np.uint8).tobytes()


def decode_ppm(data: bytes) -> Canvas:
    if not data.startswith(b"P6"):
        raise MalformedPPM("not a binary PPM (P6) file")
    # Header: magic, width, height, maxval as whitespace-separated fields,
    # then a single whitespace byte before the pixel payload.
    fields = []
    i = 2
    while len(fields) < 3:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        j = i
        while j < len(data) and not data[j : j + 1].isspace():
            j += 1
        if i == j:
            raise MalformedPPM("truncated header")
        fields.append(data[i:j])
        i = j
    i += 1  # the single separator after maxval
    try:
        w, h, maxval = (int(f) for f in fields)
    except ValueError:
        raise MalformedPPM(f"non-integer header fields: {fields}") from None
    if (w, h) != (CANVAS_SIZE, CANVAS_SIZE):
        raise MalformedPPM(f"expected 256x256, got {w}x{h}")
    if maxval != 255:
        raise MalformedPPM(f"expected maxval 255, got {maxval}")
    pixels = data[i:]
    if len(pixels) != _CHANNEL_COUNT:
        raise MalformedPPM(f"expected {_CHANNEL_COUNT} pixel bytes, got {len(pixels)}")
    return np.frombuffer(pixels, np.uint8).reshape(CANVAS_SIZE, CANVAS_SIZE, 3).copy()
