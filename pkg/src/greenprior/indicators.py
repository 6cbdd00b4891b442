"""The six per-building greening indicators and their normalization.

Raw quantities (surrounding greenspace, road distance, category, income,
seasonal surface temperature, precipitation) are measured per building,
then scaled to [0, 1] across the potential-building population with the
demand direction applied: hot and rainy push priority up, while abundant
nearby greenery, distance from traffic, and high income push it down.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geocore import (
    VEGETATION,
    ComputationError,
    PointCloud,
    Polyline,
    RasterGrid,
    distance_to_polylines,
    points_in_polygon,
)
from .ingest import BuildingAttributes
from .roofs import PotentialDecision, RoofSegment, segment_cell_centers

SEASONS = ("spring", "summer", "autumn", "winter")
SEASON_MONTHS = {
    "spring": (3, 4, 5),
    "summer": (6, 7, 8),
    "autumn": (9, 10, 11),
    "winter": (12, 1, 2),
}
# seasonal blend of the temperature indicator: summer and autumn dominate
SEASON_WEIGHTS = (0.1, 0.4, 0.4, 0.1)

MASK_CELL_DEFAULT = 5.0
GC_RADIUS_DEFAULT = 500.0
ROAD_CAP_DEFAULT = 500.0

CATEGORY_VALUES = {"private": 0.5, "public": 1.0, "misc": 0.75}


@dataclass
class RawIndicators:
    """Measured (pre-normalization) indicator inputs for one building."""

    building_id: str
    greenspace: float
    road_distance_m: float
    category: str
    income: float
    seasonal_temps: tuple[float, float, float, float]
    precipitation: float


@dataclass
class IndicatorVector:
    """The six normalized indicators, each in [0, 1], in canonical order."""

    greenspace: float
    road_distance: float
    category: float
    income: float
    temperature: float
    precipitation: float

    FIELDS = ("greenspace", "road_distance", "category", "income",
              "temperature", "precipitation")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in self.FIELDS])

    def __post_init__(self):
        for f in self.FIELDS:
            v = getattr(self, f)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"indicator {f}={v} outside [0, 1]")


# ---------------------------------------------------------------------------
# greenspace mask and coverage
# ---------------------------------------------------------------------------

def build_greenspace_mask(pc: PointCloud, potential_roofs: list[RoofSegment] | None = None,
                          cell: float = MASK_CELL_DEFAULT,
                          roof_grid: RasterGrid | None = None) -> RasterGrid:
    """Binary plan-view map of green pixels.

    Baseline mode (no segments) marks pixels containing vegetation points.
    Greened mode additionally marks pixels under the given roof segments,
    which requires the surface-model grid to place their cells. The mask
    extent covers the whole cloud either way.
    """
    if cell <= 0:
        raise ValueError("cell size must be positive")
    if potential_roofs and roof_grid is None:
        raise ValueError("greened mode needs the roof grid for georeferencing")
    xy = pc.xyz[:, :2]
    origin_x = math.floor(xy[:, 0].min() / cell) * cell
    origin_y = math.floor(xy[:, 1].min() / cell) * cell
    ncols = int(math.floor((xy[:, 0].max() - origin_x) / cell)) + 1
    nrows = int(math.floor((xy[:, 1].max() - origin_y) / cell)) + 1
    values = np.zeros((nrows, ncols))
    veg = pc.points_of(VEGETATION)
    if veg.shape[0]:
        cols = np.floor((veg[:, 0] - origin_x) / cell).astype(int)
        rows = np.floor((veg[:, 1] - origin_y) / cell).astype(int)
        inside = (rows >= 0) & (rows < nrows) & (cols >= 0) & (cols < ncols)
        values[rows[inside], cols[inside]] = 1.0
    for seg in potential_roofs or []:
        centers = segment_cell_centers(seg, roof_grid)
        cols = np.floor((centers[:, 0] - origin_x) / cell).astype(int)
        rows = np.floor((centers[:, 1] - origin_y) / cell).astype(int)
        inside = (rows >= 0) & (rows < nrows) & (cols >= 0) & (cols < ncols)
        values[rows[inside], cols[inside]] = 1.0
    return RasterGrid(origin_x, origin_y, cell, values)


def greenspace_coverage(mask: RasterGrid, x: float, y: float,
                        radius: float = GC_RADIUS_DEFAULT) -> float:
    """Share of the disk around (x, y) covered by green pixels.

    Counts mask pixels whose centers lie within the radius and multiplies
    by the pixel area over the disk area; pixels beyond the mask extent
    contribute zero, and the result is capped at 1.
    """
    cell = mask.cell
    row_lo = max(0, int(math.floor((y - radius - mask.origin_y) / cell)))
    row_hi = min(mask.nrows, int(math.floor((y + radius - mask.origin_y) / cell)) + 1)
    col_lo = max(0, int(math.floor((x - radius - mask.origin_x) / cell)))
    col_hi = min(mask.ncols, int(math.floor((x + radius - mask.origin_x) / cell)) + 1)
    if row_lo >= row_hi or col_lo >= col_hi:
        return 0.0
    sub = mask.values[row_lo:row_hi, col_lo:col_hi]
    ys = mask.origin_y + (np.arange(row_lo, row_hi) + 0.5) * cell
    xs = mask.origin_x + (np.arange(col_lo, col_hi) + 0.5) * cell
    d2 = (ys[:, None] - y) ** 2 + (xs[None, :] - x) ** 2
    count = float(np.sum((sub > 0) & (d2 <= radius * radius)))
    return min(1.0, count * cell * cell / (math.pi * radius * radius))


def roof_coverage_rate(segment: RoofSegment, mask: RasterGrid, roof_grid: RasterGrid,
                       radius: float = GC_RADIUS_DEFAULT) -> float:
    """Mean greenspace coverage over the segment's cell centers."""
    centers = segment_cell_centers(segment, roof_grid)
    return float(np.mean([greenspace_coverage(mask, cx, cy, radius) for cx, cy in centers]))


def building_coverage_rate(segments: list[RoofSegment], mask: RasterGrid,
                           roof_grid: RasterGrid, radius: float = GC_RADIUS_DEFAULT) -> float:
    """Mean coverage over all cells of the building's segments together."""
    if not segments:
        raise ValueError("building has no segments to evaluate")
    rates = []
    for seg in segments:
        centers = segment_cell_centers(seg, roof_grid)
        rates.extend(greenspace_coverage(mask, cx, cy, radius) for cx, cy in centers)
    return float(np.mean(rates))


# ---------------------------------------------------------------------------
# scalar indicators
# ---------------------------------------------------------------------------

def distance_indicator(d: float, cap: float = ROAD_CAP_DEFAULT) -> float:
    """Demand from road proximity: 1 at the road, linear to 0 at the cap."""
    if d < 0:
        raise ValueError("distance must be non-negative")
    return max(0.0, 1.0 - d / cap)


def category_indicator(category: str) -> float:
    try:
        return CATEGORY_VALUES[category]
    except KeyError:
        raise ValueError(f"unknown building category {category!r}") from None


def sample_surface_at_building(surface: RasterGrid, building: BuildingAttributes) -> float:
    """Mean surface value over cells whose centers fall inside the footprint.

    Small footprints that trap no cell center fall back to the value at the
    centroid's cell. A centroid beyond the surface extent is an error.
    """
    cx, cy = building.footprint.centroid()
    centroid_cell = surface.world_to_cell(cx, cy)
    if centroid_cell is None:
        raise ComputationError(
            f"building {building.id}: centroid ({cx:.1f}, {cy:.1f}) outside surface extent")
    x_min, y_min, x_max, y_max = building.footprint.bounds()
    row_lo = max(0, int(math.floor((y_min - surface.origin_y) / surface.cell)))
    row_hi = min(surface.nrows, int(math.floor((y_max - surface.origin_y) / surface.cell)) + 1)
    col_lo = max(0, int(math.floor((x_min - surface.origin_x) / surface.cell)))
    col_hi = min(surface.ncols, int(math.floor((x_max - surface.origin_x) / surface.cell)) + 1)
    vals = []
    for r in range(row_lo, row_hi):
        for c in range(col_lo, col_hi):
            px, py = surface.cell_center(r, c)
            v = surface.values[r, c]
            if np.isfinite(v) and building.footprint.contains(px, py):
                vals.append(float(v))
    if vals:
        return float(np.mean(vals))
    v = surface.values[centroid_cell]
    if not np.isfinite(v):
        raise ComputationError(f"building {building.id}: no data at footprint")
    return float(v)


def combine_seasonal_temperature(t: tuple[float, float, float, float]) -> float:
    """Blend the four normalized seasonal temperatures into one indicator."""
    t1, t2, t3, t4 = t
    for v in (t1, t2, t3, t4):
        if not (0.0 <= v <= 1.0):
            raise ValueError("seasonal temperatures must be normalized to [0, 1]")
    return (t1 + 4.0 * t2 + 4.0 * t3 + t4) / 10.0


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def minmax_scale(values: np.ndarray, positive: bool) -> np.ndarray:
    """Min-max to [0, 1]; constant columns become 0.5 everywhere."""
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.full(values.shape, 0.5)
    scaled = (values - lo) / (hi - lo)
    return scaled if positive else 1.0 - scaled


def normalize_indicators(raws: list[RawIndicators],
                         road_cap: float = ROAD_CAP_DEFAULT) -> dict[str, IndicatorVector]:
    """Scale raw indicators across the population into IndicatorVectors.

    Greenspace and income scale negatively (abundance lowers demand);
    seasonal temperatures scale positively per season before blending;
    precipitation scales positively. Road distance and category are already
    indicator-valued and pass through untouched.
    """
    if not raws:
        return {}
    greens = minmax_scale(np.array([r.greenspace for r in raws]), positive=False)
    incomes = minmax_scale(np.array([r.income for r in raws]), positive=False)
    precips = minmax_scale(np.array([r.precipitation for r in raws]), positive=True)
    temps = np.array([r.seasonal_temps for r in raws])
    temps_n = np.column_stack([minmax_scale(temps[:, i], positive=True) for i in range(4)])
    out = {}
    for i, r in enumerate(raws):
        out[r.building_id] = IndicatorVector(
            greenspace=float(greens[i]),
            road_distance=distance_indicator(r.road_distance_m, road_cap),
            category=category_indicator(r.category),
            income=float(incomes[i]),
            temperature=combine_seasonal_temperature(tuple(temps_n[i])),
            precipitation=float(precips[i]),
        )
    return out


# ---------------------------------------------------------------------------
# per-building measurement
# ---------------------------------------------------------------------------

def measure_building(building: BuildingAttributes, segments: list[RoofSegment],
                     mask: RasterGrid, roof_grid: RasterGrid, roads: list[Polyline],
                     income: RasterGrid, temps: dict[str, RasterGrid],
                     precip: RasterGrid, radius: float = GC_RADIUS_DEFAULT,
                     road_class: str = "main") -> RawIndicators:
    """Collect all raw indicator inputs for one building."""
    cx, cy = building.footprint.centroid()
    return RawIndicators(
        building_id=building.id,
        greenspace=building_coverage_rate(segments, mask, roof_grid, radius),
        road_distance_m=distance_to_polylines(cx, cy, roads, tag=road_class),
        category=building.category,
        income=sample_surface_at_building(income, building),
        seasonal_temps=tuple(sample_surface_at_building(temps[s], building)
                             for s in SEASONS),
        precipitation=sample_surface_at_building(precip, building),
    )


def qualifying_segments(decision: PotentialDecision, segments: list[RoofSegment],
                        slope_max_deg: float = 15.0, area_min_m2: float = 10.0) -> list[RoofSegment]:
    """The segments that made the building greenable (flat and large enough)."""
    return [s for s in segments
            if s.slope_deg < slope_max_deg and s.area_m2 > area_min_m2]
