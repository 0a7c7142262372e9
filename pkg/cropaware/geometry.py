"""
Box geometry for crop-aware regression.

Boxes are carried as center + dims. Corner form is accepted at the edges
(parsing, cropping, annotation bboxes) and converted immediately.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from cropaware.common import InvalidArgument, edge_tol, fmt_float, parse_floats, require_finite, require_positive

BOX_FORMATS = ("center", "corners")


@dataclass(frozen=True)
class Box:
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        require_finite("box center x", self.cx)
        require_finite("box center y", self.cy)
        if not (math.isfinite(self.w) and math.isfinite(self.h) and self.w > 0 and self.h > 0):
            raise InvalidArgument(f"Box dims must be positive, got w={self.w!r}, h={self.h!r}")

    @classmethod
    def from_corners(cls, x0: float, y0: float, x1: float, y1: float) -> "Box":
        if not (x1 > x0 and y1 > y0):
            raise InvalidArgument(f"Corner box needs x0 < x1 and y0 < y1, got ({x0}, {y0}, {x1}, {y1})")
        return cls((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "Box":
        return cls(x + w / 2.0, y + h / 2.0, w, h)

    @property
    def corners(self) -> Tuple[float, float, float, float]:
        return (self.cx - self.w / 2.0, self.cy - self.h / 2.0, self.cx + self.w / 2.0, self.cy + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def scale(self) -> float:
        return math.sqrt(self.w * self.h)

    def center(self, axis: int) -> float:
        return self.cx if axis == 0 else self.cy

    def dim(self, axis: int) -> float:
        return self.w if axis == 0 else self.h

    def translate(self, dx: float, dy: float) -> "Box":
        return Box(self.cx + dx, self.cy + dy, self.w, self.h)

    def scaled(self, factor: float) -> "Box":
        # Scales about the image origin, the way an image resize moves boxes.
        return Box(self.cx * factor, self.cy * factor, self.w * factor, self.h * factor)


@dataclass(frozen=True)
class Delta:
    """Anchor-relative encoding (δ, ω) of a box, per dimension."""

    dx: float
    dy: float
    wx: float
    wy: float

    def __post_init__(self) -> None:
        require_finite("delta x", self.dx)
        require_finite("delta y", self.dy)
        if not (math.isfinite(self.wx) and math.isfinite(self.wy) and self.wx > 0 and self.wy > 0):
            raise InvalidArgument(f"Delta omega must be positive, got wx={self.wx!r}, wy={self.wy!r}")

    def delta(self, axis: int) -> float:
        return self.dx if axis == 0 else self.dy

    def omega(self, axis: int) -> float:
        return self.wx if axis == 0 else self.wy

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.dx, self.dy, self.wx, self.wy)


@dataclass(frozen=True)
class CropRect:
    width: float
    height: float
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self) -> None:
        require_positive("crop width", self.width)
        require_positive("crop height", self.height)
        require_finite("crop x0", self.x0)
        require_finite("crop y0", self.y0)

    def extent(self, axis: int) -> float:
        return self.width if axis == 0 else self.height

    @property
    def corners(self) -> Tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x0 + self.width, self.y0 + self.height)

    @property
    def at_origin(self) -> bool:
        return self.x0 == 0.0 and self.y0 == 0.0

    def local(self) -> "CropRect":
        return self if self.at_origin else CropRect(self.width, self.height)


def encode(g: Box, a: Box) -> Delta:
    if not (a.w > 0 and a.h > 0):
        raise InvalidArgument("Anchor dims must be positive")
    return Delta((g.cx - a.cx) / a.w, (g.cy - a.cy) / a.h, g.w / a.w, g.h / a.h)


def decode(a: Box, p: Delta) -> Box:
    if not (p.wx > 0 and p.wy > 0):
        raise InvalidArgument("Delta omega must be positive")
    return Box(a.cx + p.dx * a.w, a.cy + p.dy * a.h, p.wx * a.w, p.wy * a.h)


def _clip_axis(center: float, dim: float, lo: float, hi: float) -> Optional[Tuple[float, float]]:
    tol = edge_tol(hi - lo)
    left = center - dim / 2.0
    right = center + dim / 2.0
    if left >= lo - tol and right <= hi + tol:
        # Already inside the crop on this axis: keep the exact values.
        return center, dim
    new_left = max(left, lo)
    new_right = min(right, hi)
    if new_right - new_left <= 0:
        return None
    return (new_left + new_right) / 2.0, new_right - new_left


def crop_box(g: Box, c: CropRect) -> Optional[Box]:
    """Intersection of g with the crop, or None when it has zero area."""
    x0, y0, x1, y1 = c.corners
    cx = _clip_axis(g.cx, g.w, x0, x1)
    if cx is None:
        return None
    cy = _clip_axis(g.cy, g.h, y0, y1)
    if cy is None:
        return None
    if cx == (g.cx, g.w) and cy == (g.cy, g.h):
        return g
    return Box(cx[0], cy[0], cx[1], cy[1])


def intersection_area(a: Box, b: Box) -> float:
    al, at, ar, ab = a.corners
    bl, bt, br, bb = b.corners
    iw = min(ar, br) - max(al, bl)
    ih = min(ab, bb) - max(at, bt)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: Box, b: Box) -> float:
    if a == b:
        return 1.0
    inter = intersection_area(a, b)
    if inter <= 0:
        return 0.0
    union = a.area + b.area - inter
    return min(1.0, inter / union)


def touching_sides(cropped: Box, c: CropRect) -> Tuple[bool, bool, bool, bool]:
    """(left, top, right, bottom) flags: which sides of a cropped box lie on the crop boundary."""
    x0, y0, x1, y1 = c.corners
    l, t, r, b = cropped.corners
    tx = edge_tol(c.width)
    ty = edge_tol(c.height)
    return (l <= x0 + tx, t <= y0 + ty, r >= x1 - tx, b >= y1 - ty)


def sample_rho_member(
    g: Box,
    c: CropRect,
    rng: np.random.Generator,
    mean_extension: Optional[float] = None,
) -> Box:
    """
    Draw a random box X whose crop equals the crop of g.

    Sides of the cropped box that lie on the crop boundary are pushed outward by
    exponentially distributed amounts; all other sides are kept as they are.
    """
    cropped = crop_box(g, c)
    if cropped is None:
        raise InvalidArgument("Ground truth does not intersect the crop")

    left, top, right, bottom = touching_sides(cropped, c)
    if not (left or top or right or bottom):
        return cropped

    mean_x = mean_extension if mean_extension is not None else c.width / 2.0
    mean_y = mean_extension if mean_extension is not None else c.height / 2.0
    x0, y0, x1, y1 = c.corners

    axes: List[Tuple[float, float]] = []
    for lo_open, hi_open, mean, center, dim, lo_edge, hi_edge in (
        (left, right, mean_x, cropped.cx, cropped.w, x0, x1),
        (top, bottom, mean_y, cropped.cy, cropped.h, y0, y1),
    ):
        if not (lo_open or hi_open):
            axes.append((center, dim))
            continue
        lo = lo_edge - float(rng.exponential(mean)) if lo_open else center - dim / 2.0
        hi = hi_edge + float(rng.exponential(mean)) if hi_open else center + dim / 2.0
        axes.append(((lo + hi) / 2.0, hi - lo))

    return Box(axes[0][0], axes[1][0], axes[0][1], axes[1][1])


def is_rho_member(x: Box, g: Box, c: CropRect, tol: float = 1e-9) -> bool:
    cx = crop_box(x, c)
    cg = crop_box(g, c)
    if cx is None or cg is None:
        return cx is None and cg is None
    scale = max(1.0, c.width, c.height)
    return all(abs(p - q) <= tol * scale for p, q in zip(cx.corners, cg.corners))


def parse_box(text: str, fmt: str = "center") -> Box:
    if fmt not in BOX_FORMATS:
        raise InvalidArgument(f"Unknown box format {fmt!r}, expected one of {BOX_FORMATS}")
    a, b, c, d = parse_floats(text, 4, "box")
    if fmt == "corners":
        return Box.from_corners(a, b, c, d)
    return Box(a, b, c, d)


def format_box(box: Box, fmt: str = "center") -> str:
    if fmt not in BOX_FORMATS:
        raise InvalidArgument(f"Unknown box format {fmt!r}, expected one of {BOX_FORMATS}")
    values = box.corners if fmt == "corners" else (box.cx, box.cy, box.w, box.h)
    return ",".join(fmt_float(v) for v in values)


def parse_delta(text: str) -> Delta:
    dx, dy, wx, wy = parse_floats(text, 4, "delta")
    return Delta(dx, dy, wx, wy)


def format_delta(p: Delta) -> str:
    return ",".join(fmt_float(v) for v in p.as_tuple())
