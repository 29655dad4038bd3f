"""Region overlap (Jaccard index) used for failure detection.

Rectangles and convex polygons are intersected exactly with
Sutherland-Hodgman clipping; if either operand is non-convex the overlap
falls back to a rasterized estimate on a 1000x1000 grid over the union
bounding box. Regions are continuous geometric sets (no half-pixel
inflation), so two regions overlap at 1.0 iff they cover the same point set.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import DegenerateRegionWarning
from .model import POLYGON, Polygon, Rectangle, Region, Special, convert_region

RASTER_GRID = 1000


def region_overlap(a: Region, b: Region, grid: int = RASTER_GRID) -> float:
    """Jaccard overlap area(a & b) / area(a | b), symmetric, in [0, 1].

    Special(0) (unknown target) overlaps 0 with everything; other special
    codes are trajectory markers and are rejected. Zero-area operands emit
    DegenerateRegionWarning and yield 0.
    """
    for r in (a, b):
        if isinstance(r, Special):
            if r.code == 0:
                return 0.0
            raise ValueError(f"special code {r.code} has no geometry")

    # Canonical operand order makes the float result bit-identical under swap.
    pa, pb = _points(a), _points(b)
    if pb < pa:
        pa, pb = pb, pa

    area_a = _shoelace(pa)
    area_b = _shoelace(pb)
    if area_a == 0.0 or area_b == 0.0:
        warnings.warn("zero-area region in overlap", DegenerateRegionWarning, stacklevel=2)
        return 0.0

    if _is_convex(pa) and _is_convex(pb):
        inter = _clip(_ccw(pa), _ccw(pb))
        area_i = _shoelace(inter) if len(inter) >= 3 else 0.0
    else:
        return _rasterized(pa, pb, grid)

    union = area_a + area_b - area_i
    if union <= 0.0:
        return 0.0
    return min(1.0, max(0.0, area_i / union))


def _points(region: Region) -> list[tuple[float, float]]:
    if isinstance(region, Rectangle):
        region = convert_region(region, POLYGON)
    return [(float(x), float(y)) for x, y in region.points]


def _shoelace(points) -> float:
    s = 0.0
    n = len(points)
    for i in range(n):
        x0, y0 = points[i]
        x1, y1 = points[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return abs(s) / 2.0


def _signed_area(points) -> float:
    s = 0.0
    n = len(points)
    for i in range(n):
        x0, y0 = points[i]
        x1, y1 = points[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return s / 2.0


def _ccw(points):
    return points if _signed_area(points) >= 0 else points[::-1]


def _is_convex(points) -> bool:
    """All turns share a sign; collinear runs are allowed."""
    n = len(points)
    sign = 0
    for i in range(n):
        ax, ay = points[i]
        bx, by = points[(i + 1) % n]
        cx, cy = points[(i + 2) % n]
        cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if cross != 0.0:
            side = 1 if cross > 0 else -1
            if sign == 0:
                sign = side
            elif side != sign:
                return False
    return True


def _clip(subject, clipper):
    """Sutherland-Hodgman; both inputs CCW, clipper convex. Points on a
    clip edge count as inside, so identical inputs clip to themselves."""
    output = list(subject)
    n = len(clipper)
    for i in range(n):
        if not output:
            return []
        cx0, cy0 = clipper[i]
        cx1, cy1 = clipper[(i + 1) % n]
        polygon, output = output, []
        sx, sy = polygon[-1]
        s_in = _inside(cx0, cy0, cx1, cy1, sx, sy)
        for ex, ey in polygon:
            e_in = _inside(cx0, cy0, cx1, cy1, ex, ey)
            if e_in:
                if not s_in:
                    output.append(_intersection(cx0, cy0, cx1, cy1, sx, sy, ex, ey))
                output.append((ex, ey))
            elif s_in:
                output.append(_intersection(cx0, cy0, cx1, cy1, sx, sy, ex, ey))
            sx, sy, s_in = ex, ey, e_in
    return output


def _inside(ax, ay, bx, by, px, py) -> bool:
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax) >= 0.0


def _intersection(ax, ay, bx, by, sx, sy, ex, ey):
    dcx, dcy = ax - bx, ay - by
    dpx, dpy = sx - ex, sy - ey
    n1 = ax * by - ay * bx
    n2 = sx * ey - sy * ex
    den = dcx * dpy - dcy * dpx
    return ((n1 * dpx - n2 * dcx) / den, (n1 * dpy - n2 * dcy) / den)


def _rasterized(pa, pb, grid: int) -> float:
    """Cell-center sampling on a grid over the union bounding box,
    even-odd rule, so non-convex rings are handled."""
    pts = np.asarray(pa + pb, dtype=float)
    x0, y0 = pts.min(axis=0)
    x1, y1 = pts.max(axis=0)
    if x1 <= x0 or y1 <= y0:
        return 0.0
    xs = np.linspace(x0, x1, grid, endpoint=False) + (x1 - x0) / grid / 2
    ys = np.linspace(y0, y1, grid, endpoint=False) + (y1 - y0) / grid / 2
    gx, gy = np.meshgrid(xs, ys)
    mask_a = _inside_mask(pa, gx, gy)
    mask_b = _inside_mask(pb, gx, gy)
    union = np.count_nonzero(mask_a | mask_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(mask_a & mask_b) / union


def _inside_mask(points, gx, gy):
    inside = np.zeros(gx.shape, dtype=bool)
    n = len(points)
    for i in range(n):
        ax, ay = points[i]
        bx, by = points[(i + 1) % n]
        if ay == by:
            continue
        straddle = (ay > gy) != (by > gy)
        cross_x = ax + (gy - ay) * (bx - ax) / (by - ay)
        inside ^= straddle & (gx < cross_x)
    return inside
