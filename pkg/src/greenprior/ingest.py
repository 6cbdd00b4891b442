"""Readers and writers for every file format the pipeline touches.

Everything is plain text: point clouds and station samples are CSV,
footprints and roads are GeoJSON, rasters are ESRI ASCII grids. Readers
validate and fail loudly; none of them skip a malformed record silently.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geocore import (
    CLASS_NAMES,
    GeometryError,
    PointCloud,
    Polygon,
    Polyline,
    RasterGrid,
    ROAD_CLASSES,
)

BUILDING_CATEGORIES = ("private", "public", "misc")

NODATA_DEFAULT = -9999.0


class FormatError(ValueError):
    """An input file does not match its documented format."""


# ---------------------------------------------------------------------------
# point clouds
# ---------------------------------------------------------------------------

def read_point_cloud(path) -> PointCloud:
    """Parse a "x,y,z,class" CSV into a PointCloud.

    A single header line is allowed on line 1, recognized by a non-numeric
    first field. Any malformed data line is an error that names the 1-based
    line number.
    """
    xyz = []
    cls = []

    def is_header(parts: list[str]) -> bool:
        try:
            float(parts[0])
        except ValueError:
            return True
        return False

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if lineno == 1 and is_header(parts):
                continue
            if len(parts) != 4:
                raise FormatError(f"{path}: line {lineno}: expected 4 fields, got {len(parts)}")
            try:
                x, y, z = float(parts[0]), float(parts[1]), float(parts[2])
                code = int(parts[3])
            except ValueError:
                raise FormatError(f"{path}: line {lineno}: could not parse {line!r}") from None
            if code not in CLASS_NAMES:
                raise FormatError(f"{path}: line {lineno}: unknown class code {code}")
            xyz.append((x, y, z))
            cls.append(code)
    if not xyz:
        raise FormatError(f"{path}: no points found")
    return PointCloud(np.array(xyz, dtype=float), np.array(cls, dtype=np.uint8))


def write_point_cloud(pc: PointCloud, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y,z,class\n")
        for (x, y, z), c in zip(pc.xyz, pc.cls):
            fh.write(f"{x:.4f},{y:.4f},{z:.4f},{int(c)}\n")


# ---------------------------------------------------------------------------
# footprints and roads (GeoJSON)
# ---------------------------------------------------------------------------

@dataclass
class BuildingAttributes:
    """Static facts about one building: identity, age, category, footprint."""

    id: str
    age_years: int
    category: str
    footprint: Polygon

    def __post_init__(self):
        if self.age_years < 0:
            raise ValueError(f"building {self.id}: age_years must be non-negative")
        if self.category not in BUILDING_CATEGORIES:
            raise ValueError(f"building {self.id}: unknown category {self.category!r}")


def _load_feature_collection(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise FormatError(f"{path}: expected a GeoJSON FeatureCollection")
    feats = doc.get("features")
    if not isinstance(feats, list):
        raise FormatError(f"{path}: FeatureCollection has no feature list")
    return feats


def read_footprints(path) -> list[BuildingAttributes]:
    """Load building footprints with id, age_years and category properties."""
    feats = _load_feature_collection(path)
    out: list[BuildingAttributes] = []
    seen: set[str] = set()
    for idx, feat in enumerate(feats):
        props = feat.get("properties") or {}
        label = props.get("id", f"feature #{idx}")
        geom = feat.get("geometry") or {}
        if geom.get("type") != "Polygon":
            raise FormatError(f"{path}: {label}: geometry must be Polygon, got {geom.get('type')!r}")
        for key in ("id", "age_years", "category"):
            if key not in props:
                raise FormatError(f"{path}: {label}: missing property {key!r}")
        bid = str(props["id"])
        if bid in seen:
            raise FormatError(f"{path}: duplicate building id {bid!r}")
        seen.add(bid)
        rings = geom.get("coordinates")
        if not rings:
            raise FormatError(f"{path}: {bid}: polygon has no rings")
        try:
            poly = Polygon(rings[0], holes=list(rings[1:]))
        except GeometryError as exc:
            raise FormatError(f"{path}: {bid}: {exc}") from None
        try:
            age = int(props["age_years"])
        except (TypeError, ValueError):
            raise FormatError(f"{path}: {bid}: age_years must be an integer") from None
        try:
            out.append(BuildingAttributes(bid, age, str(props["category"]), poly))
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None
    return out


def read_roads(path) -> list[Polyline]:
    """Load road centerlines; each LineString feature carries a class property."""
    feats = _load_feature_collection(path)
    out: list[Polyline] = []
    for idx, feat in enumerate(feats):
        geom = feat.get("geometry") or {}
        if geom.get("type") != "LineString":
            raise FormatError(f"{path}: feature #{idx}: geometry must be LineString")
        props = feat.get("properties") or {}
        tag = props.get("class")
        if tag not in ROAD_CLASSES:
            raise FormatError(f"{path}: feature #{idx}: road class must be one of "
                              f"{ROAD_CLASSES}, got {tag!r}")
        try:
            out.append(Polyline(geom.get("coordinates"), tag=tag))
        except GeometryError as exc:
            raise FormatError(f"{path}: feature #{idx}: {exc}") from None
    if not out:
        raise FormatError(f"{path}: no road features")
    return out


def write_footprints(buildings: list[BuildingAttributes], path) -> None:
    feats = []
    for b in buildings:
        rings = [b.footprint.exterior.tolist()] + [h.tolist() for h in b.footprint.holes]
        feats.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": rings},
            "properties": {"id": b.id, "age_years": b.age_years, "category": b.category},
        })
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"type": "FeatureCollection", "features": feats}, fh, indent=1)
        fh.write("\n")


def write_roads(lines: list[Polyline], path) -> None:
    feats = [{
        "type": "Feature",
        "geometry": {"type": "LineString", "coordinates": ln.coords.tolist()},
        "properties": {"class": ln.tag},
    } for ln in lines]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"type": "FeatureCollection", "features": feats}, fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# station samples (x, y, value)
# ---------------------------------------------------------------------------

def read_xy_value(path) -> np.ndarray:
    """Read a "x,y,value" CSV (header line required) into an (n, 3) array."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if lineno == 1:
                try:
                    [float(p) for p in parts]
                except ValueError:
                    continue  # good: line 1 is the header
                raise FormatError(f"{path}: first line must be a header, not data")
            if len(parts) != 3:
                raise FormatError(f"{path}: line {lineno}: expected 3 fields, got {len(parts)}")
            try:
                rows.append((float(parts[0]), float(parts[1]), float(parts[2])))
            except ValueError:
                raise FormatError(f"{path}: line {lineno}: could not parse {line!r}") from None
    if not rows:
        raise FormatError(f"{path}: no samples found")
    arr = np.array(rows, dtype=float)
    if not np.isfinite(arr).all():
        raise FormatError(f"{path}: non-finite sample values")
    return arr


def write_xy_value(arr: np.ndarray, path, header: str = "x,y,value") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for x, y, v in np.asarray(arr, dtype=float):
            fh.write(f"{x:.4f},{y:.4f},{v:.6f}\n")


# ---------------------------------------------------------------------------
# ESRI ASCII rasters
# ---------------------------------------------------------------------------

_ASC_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


def read_raster_asc(path) -> RasterGrid:
    """Read an ESRI ASCII grid. Nodata cells become NaN internally."""
    header: dict[str, float] = {}
    data_tokens: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            key = parts[0].lower()
            if len(header) < 6 and key in _ASC_KEYS and len(parts) == 2:
                try:
                    header[key] = float(parts[1])
                except ValueError:
                    raise FormatError(f"{path}: bad header value for {parts[0]}") from None
            else:
                data_tokens.extend(parts)
    missing = [k for k in _ASC_KEYS if k not in header]
    if missing:
        raise FormatError(f"{path}: missing header keyword(s): {', '.join(missing)}")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    if ncols < 1 or nrows < 1:
        raise FormatError(f"{path}: grid dimensions must be positive")
    if len(data_tokens) != ncols * nrows:
        raise FormatError(f"{path}: expected {ncols * nrows} values, found {len(data_tokens)}")
    try:
        flat = np.array([float(t) for t in data_tokens], dtype=float)
    except ValueError:
        raise FormatError(f"{path}: non-numeric raster value") from None
    nodata = header["nodata_value"]
    flat[flat == nodata] = np.nan
    # file stores the top row first; flip into the bottom-row-0 convention
    values = np.flipud(flat.reshape(nrows, ncols))
    return RasterGrid(header["xllcorner"], header["yllcorner"], header["cellsize"], values)


def write_raster_asc(grid: RasterGrid, path, nodata: float = NODATA_DEFAULT) -> None:
    """Write a RasterGrid as an ESRI ASCII file, bit-exact under round trip.

    Values are serialized with repr() so that read_raster_asc(write(g))
    reproduces g to the last bit.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"ncols {grid.ncols}\n")
        fh.write(f"nrows {grid.nrows}\n")
        fh.write(f"xllcorner {repr(grid.origin_x)}\n")
        fh.write(f"yllcorner {repr(grid.origin_y)}\n")
        fh.write(f"cellsize {repr(grid.cell)}\n")
        fh.write(f"NODATA_value {repr(nodata)}\n")
        for row in np.flipud(grid.values):
            fh.write(" ".join(repr(nodata) if np.isnan(v) else repr(float(v)) for v in row))
            fh.write("\n")


# ---------------------------------------------------------------------------
# building report
# ---------------------------------------------------------------------------

REPORT_COLUMNS = (
    "id",
    "potential",
    "roof_area_m2",
    "slope_deg",
    "height_m",
    "ind_greenspace",
    "ind_road_dist",
    "ind_category",
    "ind_income",
    "ind_temperature",
    "ind_precip",
    "priority",
)


@dataclass
class BuildingReportRow:
    """One output row of the final per-building report.

    Numeric fields other than id/potential may be None for buildings that
    were screened out before indicators were computed; they serialize as
    empty strings.
    """

    id: str
    potential: bool
    roof_area_m2: float | None = None
    slope_deg: float | None = None
    height_m: float | None = None
    ind_greenspace: float | None = None
    ind_road_dist: float | None = None
    ind_category: float | None = None
    ind_income: float | None = None
    ind_temperature: float | None = None
    ind_precip: float | None = None
    priority: float | None = None


def _fmt(v: float | None) -> str:
    return "" if v is None else f"{v:.6f}"


def write_building_report(rows: list[BuildingReportRow], path_csv, path_geojson=None,
                          footprints: dict[str, Polygon] | None = None) -> None:
    """Write the per-building report CSV and, optionally, its GeoJSON mirror.

    Column order is fixed (REPORT_COLUMNS); floats use 6 decimal places and
    the potential flag is lowercase true/false.
    """
    with open(path_csv, "w", encoding="utf-8") as fh:
        fh.write(",".join(REPORT_COLUMNS) + "\n")
        for r in rows:
            fh.write(",".join([
                r.id,
                "true" if r.potential else "false",
                _fmt(r.roof_area_m2),
                _fmt(r.slope_deg),
                _fmt(r.height_m),
                _fmt(r.ind_greenspace),
                _fmt(r.ind_road_dist),
                _fmt(r.ind_category),
                _fmt(r.ind_income),
                _fmt(r.ind_temperature),
                _fmt(r.ind_precip),
                _fmt(r.priority),
            ]) + "\n")
    if path_geojson is None:
        return
    footprints = footprints or {}
    feats = []
    for r in rows:
        poly = footprints.get(r.id)
        geom = None
        if poly is not None:
            rings = [poly.exterior.tolist()] + [h.tolist() for h in poly.holes]
            geom = {"type": "Polygon", "coordinates": rings}
        props = {"id": r.id, "potential": r.potential}
        for col in REPORT_COLUMNS[2:]:
            v = getattr(r, col)
            props[col] = None if v is None else round(float(v), 6)
        feats.append({"type": "Feature", "geometry": geom, "properties": props})
    with open(path_geojson, "w", encoding="utf-8") as fh:
        json.dump({"type": "FeatureCollection", "features": feats}, fh, indent=1)
        fh.write("\n")


def read_building_report(path_csv) -> list[BuildingReportRow]:
    """Read back a report CSV written by write_building_report."""
    rows: list[BuildingReportRow] = []
    with open(path_csv, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.split(",") != list(REPORT_COLUMNS):
            raise FormatError(f"{path_csv}: unexpected report columns")
        for lineno, raw in enumerate(fh, start=2):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(REPORT_COLUMNS):
                raise FormatError(f"{path_csv}: line {lineno}: wrong field count")
            if parts[1] not in ("true", "false"):
                raise FormatError(f"{path_csv}: line {lineno}: potential must be true/false")
            vals = [None if p == "" else float(p) for p in parts[2:]]
            rows.append(BuildingReportRow(parts[0], parts[1] == "true", *vals))
    return rows
