"""Planar geometry and raster primitives shared by the whole pipeline.

All coordinates are meters in a projected CRS; nothing in here knows about
geodesy. Rasters are anchored at their lower-left corner, row 0 is the
southernmost row, and NaN marks nodata cells.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Point classification codes used throughout.
GROUND = 0
BUILDING = 1
VEGETATION = 2
OTHER = 3

CLASS_NAMES = {GROUND: "ground", BUILDING: "building", VEGETATION: "vegetation", OTHER: "other"}

# Absolute tolerance (meters) below which a point counts as lying on a
# polygon edge or on top of a sample location.
EDGE_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid geometric construction (open ring, self-intersection, ...)."""


class ComputationError(RuntimeError):
    """A pipeline computation failed on otherwise well-formed inputs."""


# ---------------------------------------------------------------------------
# point cloud
# ---------------------------------------------------------------------------

@dataclass
class PointCloud:
    """Classified 3-D points stored columnar: xyz is (n, 3), cls is (n,)."""

    xyz: np.ndarray
    cls: np.ndarray

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=float)
        self.cls = np.asarray(self.cls, dtype=np.uint8)
        if self.xyz.ndim != 2 or self.xyz.shape[1] != 3:
            raise ValueError("xyz must have shape (n, 3)")
        if self.cls.shape != (self.xyz.shape[0],):
            raise ValueError("cls must have one entry per point")
        if self.xyz.size and not np.isfinite(self.xyz).all():
            raise ValueError("point coordinates must be finite")
        if self.cls.size and not np.isin(self.cls, list(CLASS_NAMES)).all():
            raise ValueError("unknown classification code in point cloud")

    def __len__(self) -> int:
        return self.xyz.shape[0]

    def points_of(self, code: int) -> np.ndarray:
        """Return the (m, 3) coordinates of points with the given class code."""
        return self.xyz[self.cls == code]


# ---------------------------------------------------------------------------
# raster grid
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class RasterGrid:
    """Axis-aligned float grid.

    ``origin_x, origin_y`` is the lower-left corner. Cell (row, col) covers
    the half-open box [origin + i*cell, origin + (i+1)*cell) on each axis,
    with row 0 at the bottom. ``values`` is (nrows, ncols) float64 and NaN
    marks nodata; nodata must never take part in < or > comparisons.
    """

    origin_x: float
    origin_y: float
    cell: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.cell <= 0:
            raise ValueError("cell size must be positive")
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ValueError("values must be a non-empty 2-D array")

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    def world_to_cell(self, x: float, y: float) -> tuple[int, int] | None:
        """Map a world coordinate to its (row, col), or None when outside.

        Cells are half-open, so a point exactly on an interior cell boundary
        belongs to the higher-index cell.
        """
        col = math.floor((x - self.origin_x) / self.cell)
        row = math.floor((y - self.origin_y) / self.cell)
        if 0 <= row < self.nrows and 0 <= col < self.ncols:
            return row, col
        return None

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (self.origin_x + (col + 0.5) * self.cell,
                self.origin_y + (row + 0.5) * self.cell)

    def x_centers(self) -> np.ndarray:
        return self.origin_x + (np.arange(self.ncols) + 0.5) * self.cell

    def y_centers(self) -> np.ndarray:
        return self.origin_y + (np.arange(self.nrows) + 0.5) * self.cell

    def copy(self) -> "RasterGrid":
        return RasterGrid(self.origin_x, self.origin_y, self.cell, self.values.copy())

    def same_as(self, other: "RasterGrid") -> bool:
        """Exact equality of georeference and values (NaN placement included)."""
        return (self.origin_x == other.origin_x
                and self.origin_y == other.origin_y
                and self.cell == other.cell
                and self.values.shape == other.values.shape
                and np.array_equal(self.values, other.values, equal_nan=True))


def world_to_cell(grid: RasterGrid, x: float, y: float) -> tuple[int, int] | None:
    """Module-level alias for :meth:`RasterGrid.world_to_cell`."""
    return grid.world_to_cell(x, y)


# ---------------------------------------------------------------------------
# polygons
# ---------------------------------------------------------------------------

def _ring_array(ring, name: str) -> np.ndarray:
    arr = np.asarray(ring, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeometryError(f"{name} must be an (n, 2) coordinate sequence")
    if arr.shape[0] < 4:
        raise GeometryError(f"{name} needs at least 4 vertices (closed ring)")
    if not np.isfinite(arr).all():
        raise GeometryError(f"{name} has non-finite coordinates")
    if not (arr[0] == arr[-1]).all():
        raise GeometryError(f"{name} is not closed (first vertex must equal last)")
    if (np.abs(np.diff(arr, axis=0)).sum(axis=1) == 0).any():
        raise GeometryError(f"{name} repeats consecutive vertices")
    return arr


def _ring_signed_area(ring: np.ndarray) -> float:
    x, y = ring[:-1, 0], ring[:-1, 1]
    xn, yn = ring[1:, 0], ring[1:, 1]
    return 0.5 * float(np.sum(x * yn - xn * y))


def _ring_centroid(ring: np.ndarray) -> tuple[float, float]:
    x, y = ring[:-1, 0], ring[:-1, 1]
    xn, yn = ring[1:, 0], ring[1:, 1]
    cross = x * yn - xn * y
    a = 0.5 * float(np.sum(cross))
    if a == 0.0:
        return float(x.mean()), float(y.mean())
    cx = float(np.sum((x + xn) * cross)) / (6.0 * a)
    cy = float(np.sum((y + yn) * cross)) / (6.0 * a)
    return cx, cy


def _segments_properly_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 \
        and d3 != 0 and d4 != 0


@dataclass(eq=False)
class Polygon:
    """Closed exterior ring plus optional interior rings (holes), in meters.

    The exterior must be simple (no proper self-intersection) and enclose a
    positive area; this is checked at construction time.
    """

    exterior: np.ndarray
    holes: list = field(default_factory=list)

    def __post_init__(self):
        self.exterior = _ring_array(self.exterior, "exterior ring")
        self.holes = [_ring_array(h, "interior ring") for h in self.holes]
        segs = list(zip(self.exterior[:-1], self.exterior[1:]))
        n = len(segs)
        for i in range(n):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue  # first and last segments share a vertex
                if _segments_properly_intersect(segs[i][0], segs[i][1], segs[j][0], segs[j][1]):
                    raise GeometryError("exterior ring is self-intersecting")
        if self.area() <= 0:
            raise GeometryError("polygon area must be positive")

    def area(self) -> float:
        a = abs(_ring_signed_area(self.exterior))
        for h in self.holes:
            a -= abs(_ring_signed_area(h))
        return a

    def centroid(self) -> tuple[float, float]:
        a_ext = abs(_ring_signed_area(self.exterior))
        cx, cy = _ring_centroid(self.exterior)
        num_x, num_y, denom = cx * a_ext, cy * a_ext, a_ext
        for h in self.holes:
            a_h = abs(_ring_signed_area(h))
            hx, hy = _ring_centroid(h)
            num_x -= hx * a_h
            num_y -= hy * a_h
            denom -= a_h
        if denom <= 0:
            return cx, cy
        return num_x / denom, num_y / denom

    def bounds(self) -> tuple[float, float, float, float]:
        xs, ys = self.exterior[:, 0], self.exterior[:, 1]
        return float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max())

    def contains(self, x: float, y: float) -> bool:
        return bool(points_in_polygon(np.array([[x, y]]), self)[0])


def _on_any_edge(points: np.ndarray, ring: np.ndarray, tol: float) -> np.ndarray:
    """Boolean mask of points lying within tol of any segment of the ring."""
    hit = np.zeros(points.shape[0], dtype=bool)
    for (ax, ay), (bx, by) in zip(ring[:-1], ring[1:]):
        dx, dy = bx - ax, by - ay
        seg_len2 = dx * dx + dy * dy
        px = points[:, 0] - ax
        py = points[:, 1] - ay
        t = np.clip((px * dx + py * dy) / seg_len2, 0.0, 1.0)
        ex = px - t * dx
        ey = py - t * dy
        hit |= ex * ex + ey * ey <= tol * tol
    return hit


def _ray_cast(points: np.ndarray, ring: np.ndarray) -> np.ndarray:
    """Even-odd crossing test against one ring, vectorized over points."""
    inside = np.zeros(points.shape[0], dtype=bool)
    x, y = points[:, 0], points[:, 1]
    for (ax, ay), (bx, by) in zip(ring[:-1], ring[1:]):
        crosses = (ay > y) != (by > y)
        if not crosses.any():
            continue
        with np.errstate(invalid="ignore", divide="ignore"):
            x_at = ax + (y - ay) * (bx - ax) / (by - ay)
        inside ^= crosses & (x < x_at)
    return inside


def points_in_polygon(points: np.ndarray, poly: Polygon, tol: float = EDGE_TOL) -> np.ndarray:
    """Vectorized containment test; points on any ring boundary count inside."""
    points = np.asarray(points, dtype=float)
    on_edge = _on_any_edge(points, poly.exterior, tol)
    for h in poly.holes:
        on_edge |= _on_any_edge(points, h, tol)
    inside = _ray_cast(points, poly.exterior)
    for h in poly.holes:
        inside &= ~_ray_cast(points, h)
    return inside | on_edge


def point_in_polygon(x: float, y: float, poly: Polygon) -> bool:
    """True iff (x, y) is inside the polygon; boundary points count as inside."""
    return poly.contains(x, y)


# ---------------------------------------------------------------------------
# polylines
# ---------------------------------------------------------------------------

ROAD_CLASSES = ("main", "minor")


@dataclass(eq=False)
class Polyline:
    """Ordered vertex chain with a class tag ("main" or "minor")."""

    coords: np.ndarray
    tag: str = "minor"

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim != 2 or self.coords.shape[1] != 2 or self.coords.shape[0] < 2:
            raise GeometryError("polyline needs at least 2 (x, y) vertices")
        if not np.isfinite(self.coords).all():
            raise GeometryError("polyline has non-finite coordinates")
        if (np.abs(np.diff(self.coords, axis=0)).sum(axis=1) == 0).any():
            raise GeometryError("polyline repeats consecutive vertices")
        if self.tag not in ROAD_CLASSES:
            raise GeometryError(f"unknown polyline class {self.tag!r}")


def point_segment_distance(px: float, py: float, ax: float, ay: float,
                           bx: float, by: float) -> float:
    dx, dy = bx - ax, by - ay
    seg_len2 = dx * dx + dy * dy
    if seg_len2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / seg_len2
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def distance_to_polylines(x: float, y: float, lines: list[Polyline],
                          tag: str | None = None) -> float:
    """Minimum distance from (x, y) to any segment of the selected polylines.

    ``tag`` restricts the search to polylines with that class; None uses all.
    Raises GeometryError when no polyline passes the filter.
    """
    selected = [ln for ln in lines if tag is None or ln.tag == tag]
    if not selected:
        raise GeometryError(f"no polylines with class {tag!r} to measure against")
    best = math.inf
    for ln in selected:
        for (ax, ay), (bx, by) in zip(ln.coords[:-1], ln.coords[1:]):
            d = point_segment_distance(x, y, ax, ay, bx, by)
            if d < best:
                best = d
    return best
