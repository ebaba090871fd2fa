"""Pure computational geometry for text regions.

Polygons follow the paired-vertex convention used by word-level text
annotations: 2n vertices where the first n run along one long side of the
word and the last n run along the opposite side in reverse, so vertex i is
paired with vertex 2n-1-i across the center axis.

Coordinates are image-frame pixels: x rightward, y downward. Grids are
numpy arrays indexed [row, col] = [y_cell, x_cell].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import cv2
import numpy as np
from shapely.geometry import Polygon as _ShapelyPolygon


class MalformedPolygonError(ValueError):
    """Raised when a polygon violates the paired-vertex convention."""


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def distance_to(self, other: Point) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class AxisAlignedBox:
    """Axis-aligned rectangle with left <= right and top <= bottom."""

    left: float
    top: float
    right: float
    bottom: float

    def __post_init__(self):
        if self.left > self.right or self.top > self.bottom:
            raise ValueError(f"inverted box: {self}")

    @property
    def width(self) -> float:
        return self.right - self.left

    @property
    def height(self) -> float:
        return self.bottom - self.top

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, p: Point) -> bool:
        return self.left <= p.x <= self.right and self.top <= p.y <= self.bottom

    def iou(self, other: AxisAlignedBox) -> float:
        iw = min(self.right, other.right) - max(self.left, other.left)
        ih = min(self.bottom, other.bottom) - max(self.top, other.top)
        if iw <= 0 or ih <= 0:
            return 0.0
        inter = iw * ih
        union = self.area + other.area - inter
        return inter / union if union > 0 else 0.0

    def corners(self) -> "Polygon":
        return Polygon((
            Point(self.left, self.top),
            Point(self.right, self.top),
            Point(self.right, self.bottom),
            Point(self.left, self.bottom),
        ))


@dataclass(frozen=True)
class Polygon:
    """Closed polygon, vertices in stored order (no implicit closing vertex)."""

    vertices: tuple[Point, ...]

    def __init__(self, vertices):
        object.__setattr__(self, "vertices", tuple(
            v if isinstance(v, Point) else Point(float(v[0]), float(v[1]))
            for v in vertices
        ))

    def __len__(self) -> int:
        return len(self.vertices)

    def as_array(self) -> np.ndarray:
        return np.array([(v.x, v.y) for v in self.vertices], dtype=np.float64)

    @property
    def area(self) -> float:
        """Unsigned area by the shoelace formula."""
        pts = self.as_array()
        if len(pts) < 3:
            return 0.0
        x, y = pts[:, 0], pts[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    def bounding_box(self) -> AxisAlignedBox:
        pts = self.as_array()
        return AxisAlignedBox(pts[:, 0].min(), pts[:, 1].min(),
                              pts[:, 0].max(), pts[:, 1].max())

    def centroid(self) -> Point:
        pts = self.as_array()
        return Point(float(pts[:, 0].mean()), float(pts[:, 1].mean()))


@dataclass(frozen=True)
class Polyline:
    """Open polyline with cached cumulative arc length per vertex."""

    points: tuple[Point, ...]
    cumulative_length: tuple[float, ...] = field(default=())
    degenerate: bool = False

    def __init__(self, points):
        pts = tuple(p if isinstance(p, Point) else Point(float(p[0]), float(p[1]))
                    for p in points)
        if len(pts) < 2:
            raise MalformedPolygonError("polyline needs at least 2 points")
        cum = [0.0]
        for a, b in zip(pts[:-1], pts[1:]):
            cum.append(cum[-1] + a.distance_to(b))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "cumulative_length", tuple(cum))
        object.__setattr__(self, "degenerate", cum[-1] <= 0.0)

    @property
    def length(self) -> float:
        return self.cumulative_length[-1]

    def point_at(self, s: float) -> Point:
        """Point at arc length s, clamped to [0, length]."""
        if self.degenerate:
            return self.points[0]
        s = min(max(s, 0.0), self.length)
        cum = self.cumulative_length
        # rightmost segment whose start is <= s
        i = int(np.searchsorted(cum, s, side="right")) - 1
        i = min(i, len(self.points) - 2)
        seg = cum[i + 1] - cum[i]
        t = 0.0 if seg <= 0 else (s - cum[i]) / seg
        a, b = self.points[i], self.points[i + 1]
        return Point(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))


def _paired_halves(poly: Polygon) -> tuple[np.ndarray, np.ndarray]:
    n2 = len(poly)
    if n2 % 2 != 0:
        raise MalformedPolygonError(f"odd vertex count {n2}")
    if n2 < 4:
        raise MalformedPolygonError(f"need at least 4 vertices, got {n2}")
    pts = poly.as_array()
    n = n2 // 2
    return pts[:n], pts[n2 - 1:n - 1:-1]  # second half reversed to align pairs


def center_line(poly: Polygon) -> Polyline:
    """Center axis: polyline of midpoints of paired vertices (i, 2n-1-i).

    Ordered from the text's reading start to its end, as encoded by the
    annotation's vertex order.
    """
    top, bottom = _paired_halves(poly)
    mids = (top + bottom) / 2.0
    return Polyline([Point(x, y) for x, y in mids])


def shrink_positive_region(poly: Polygon) -> Polygon:
    """Central quadrilateral of a text polygon, shrunk about its centroid.

    The quadrilateral is spanned by the two vertex pairs at the ends of the
    center axis. It is scaled along its local length/height axes to a
    retained height fraction of 0.2 and a retained width fraction of
    min(1, 0.1 * (Np // 2 - 1)) for curved polygons (Np >= 6), or 0.2 for
    quadrilaterals (Np = 4).
    """
    top, bottom = _paired_halves(poly)
    np_count = len(poly)
    n = np_count // 2

    height_ratio = 0.2
    if np_count == 4:
        width_ratio = 0.2
    else:
        width_ratio = min(1.0, 0.1 * (np_count // 2 - 1))

    # end quadrilateral: start pair then end pair, polygon winding order
    quad = np.array([top[0], top[n - 1], bottom[n - 1], bottom[0]])
    centroid = quad.mean(axis=0)

    start_mid = (top[0] + bottom[0]) / 2.0
    end_mid = (top[n - 1] + bottom[n - 1]) / 2.0
    axis = end_mid - start_mid
    norm = np.linalg.norm(axis)
    if norm <= 1e-12:
        # degenerate: no length axis, shrink isotropically at height ratio
        u = np.array([1.0, 0.0])
    else:
        u = axis / norm
    v = np.array([-u[1], u[0]])

    rel = quad - centroid
    along = rel @ u
    across = rel @ v
    shrunk = centroid + np.outer(along * width_ratio, u) + np.outer(across * height_ratio, v)
    return Polygon([Point(x, y) for x, y in shrunk])


def uniform_points(line: Polyline, count: int) -> list[Point]:
    """count points uniformly spaced by arc length, endpoints included.

    count = 1 returns the midpoint. A degenerate (zero-length) polyline
    yields count copies of its first point.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if line.degenerate:
        return [line.points[0]] * count
    if count == 1:
        return [line.point_at(line.length / 2.0)]
    step = line.length / (count - 1)
    return [line.point_at(i * step) for i in range(count)]


def polygon_iou(a: Polygon, b: Polygon) -> float:
    """Intersection over union of two simple polygons by exact clipping."""
    sa = _ShapelyPolygon(a.as_array())
    sb = _ShapelyPolygon(b.as_array())
    if not sa.is_valid:
        sa = sa.buffer(0)
    if not sb.is_valid:
        sb = sb.buffer(0)
    inter = sa.intersection(sb).area
    union = sa.area + sb.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def points_in_polygon(xs: np.ndarray, ys: np.ndarray, poly: Polygon) -> np.ndarray:
    """Vectorized even-odd point-in-polygon test; boundary counts as inside."""
    pts = poly.as_array()
    if len(pts) < 3:
        return np.zeros(np.broadcast(xs, ys).shape, dtype=bool)
    x0 = pts[:, 0]
    y0 = pts[:, 1]
    x1 = np.roll(x0, -1)
    y1 = np.roll(y0, -1)

    px = np.asarray(xs, dtype=np.float64)[..., None]
    py = np.asarray(ys, dtype=np.float64)[..., None]

    # crossing-number test against each edge
    cond = (y0 > py) != (y1 > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_int = (x1 - x0) * (py - y0) / (y1 - y0) + x0
    crossings = np.sum(cond & (px < x_int), axis=-1)
    inside = (crossings % 2) == 1

    # boundary test: point within eps of any edge segment
    ex = x1 - x0
    ey = y1 - y0
    seg_len2 = ex * ex + ey * ey
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((px - x0) * ex + (py - y0) * ey) / np.where(seg_len2 > 0, seg_len2, 1.0)
    t = np.clip(t, 0.0, 1.0)
    dx = px - (x0 + t * ex)
    dy = py - (y0 + t * ey)
    on_edge = np.any(dx * dx + dy * dy <= 1e-18, axis=-1)
    return inside | on_edge


def rasterize(poly: Polygon, width: int, height: int, stride: float = 1.0) -> np.ndarray:
    """Binary (height, width) grid; cell (w, h) is 1 iff its center point
    ((w + 0.5) * stride, (h + 0.5) * stride) lies inside poly (boundary
    counts as inside). An empty/degenerate polygon gives an all-zero grid.
    """
    if stride <= 0:
        raise ValueError(f"stride must be positive, got {stride}")
    grid = np.zeros((height, width), dtype=np.uint8)
    if len(poly) < 3 or poly.area <= 0:
        return grid
    box = poly.bounding_box()
    w_lo = max(0, int(math.floor(box.left / stride - 0.5)))
    w_hi = min(width - 1, int(math.ceil(box.right / stride - 0.5)))
    h_lo = max(0, int(math.floor(box.top / stride - 0.5)))
    h_hi = min(height - 1, int(math.ceil(box.bottom / stride - 0.5)))
    if w_lo > w_hi or h_lo > h_hi:
        return grid
    ws = np.arange(w_lo, w_hi + 1)
    hs = np.arange(h_lo, h_hi + 1)
    cx = (ws[None, :] + 0.5) * stride
    cy = (hs[:, None] + 0.5) * stride
    cx, cy = np.broadcast_arrays(cx, cy)
    grid[h_lo:h_hi + 1, w_lo:w_hi + 1] = points_in_polygon(cx, cy, poly)
    return grid


def mask_to_polygons(mask: np.ndarray, min_area: int = 4) -> list[Polygon]:
    """Trace one polygon per 8-connected foreground component.

    Components smaller than min_area cells are dropped as speckle. Polygon
    vertices sit on cell centers ((w + 0.5), (h + 0.5)) of the boundary
    cells, so rasterizing the result at stride 1 recovers the component.
    """
    mask = (np.asarray(mask) > 0).astype(np.uint8)
    if mask.sum() == 0:
        return []
    num, labels, stats, _ = cv2.connectedComponentsWithStats(mask, connectivity=8)
    polys = []
    for label in range(1, num):
        if stats[label, cv2.CC_STAT_AREA] < min_area:
            continue
        component = (labels == label).astype(np.uint8)
        contours, _ = cv2.findContours(component, cv2.RETR_EXTERNAL,
                                       cv2.CHAIN_APPROX_SIMPLE)
        if not contours:
            continue
        contour = max(contours, key=cv2.contourArea).reshape(-1, 2)
        poly = Polygon([(x + 0.5, y + 0.5) for x, y in contour])
        if len(contour) < 3 or poly.area <= 0:
            # 1-cell-wide component traces to a zero-area path; fall back to
            # the cell-boundary rectangle of the component extent
            x0 = stats[label, cv2.CC_STAT_LEFT]
            y0 = stats[label, cv2.CC_STAT_TOP]
            w = stats[label, cv2.CC_STAT_WIDTH]
            h = stats[label, cv2.CC_STAT_HEIGHT]
            poly = Polygon([(x0, y0), (x0 + w, y0), (x0 + w, y0 + h), (x0, y0 + h)])
        polys.append(poly)
    return polys
