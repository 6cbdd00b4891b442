"""Command-line pipeline: synth, extract, indicators, prioritize, benefits, report.

Each subcommand reads the previous stage's files from the output directory
and writes its own, so every step can be rerun or inspected on its own.
All outputs use fixed formatting and ordering: rerunning a stage with
unchanged inputs reproduces its files byte for byte.
"""

import argparse
import csv
import math
import os
import sys

import numpy as np

from .benefits import (
    assemble_report,
    greenspace_exposure,
    income_greenspace_regression,
    population_grid_from_points,
)
from .config import ConfigError, load_config
from .geocore import ComputationError, RasterGrid
from .indicators import (
    SEASONS,
    build_greenspace_mask,
    measure_building,
    normalize_indicators,
)
from .ingest import (
    BuildingReportRow,
    read_footprints,
    read_point_cloud,
    read_raster_asc,
    read_roads,
    read_xy_value,
    write_building_report,
    write_raster_asc,
)
from .interp import SampleSet, fill_raster_nodata, interpolate_grid
from .priority import (
    WEIGHT_SCHEMES,
    WeightVector,
    compute_weights,
    priority_summary,
    rank_buildings,
)
from .roofs import RoofSegment, extract_all
from .synth import SyntheticCitySpec, generate_city

IND_FIELDS = ("greenspace", "road_distance", "category", "income",
              "temperature", "precipitation")
WEIGHT_COLUMNS = ("w_greenspace", "w_road_dist", "w_category", "w_income",
                  "w_temperature", "w_precip")

# Reference values reported by the Hong Kong 2021 citywide study the method
# follows; shown in report.md for orientation only, since a synthetic
# desk-scale scene cannot reproduce citywide magnitudes.
HK_REFERENCE = (
    ("share of buildings with potential", "85.3 %"),
    ("greenable roof area", "63.9 km2"),
    ("greenspace exposure, baseline", "35.3 %"),
    ("greenspace exposure, greened", "56.7 %"),
    ("direct carbon uptake", "93,000 t/yr"),
    ("indirect carbon reduction", "183,000 t/yr"),
    ("total carbon reduction", "276,000 t/yr (about 0.8 % of 34.7 Mt)"),
    ("cooling energy saved", "2.33e8 kWh/yr"),
    ("total money value", "HK$318 million/yr"),
    ("income versus greenspace", "r = -0.25, p < 0.001"),
)


def _out_path(cfg, name):
    return os.path.join(cfg.out_dir, name)


def _artifact(cfg, name, prior):
    path = _out_path(cfg, name)
    if not os.path.isfile(path):
        raise ConfigError(
            f"missing artifact {path}: run the {prior} subcommand first")
    return path


def _read_rows(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _f(v):
    return f"{float(v):.6f}"


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def cmd_synth(args):
    spec = SyntheticCitySpec(seed=args.seed, n_buildings=args.buildings)
    truths = generate_city(spec, args.out)
    n_pot = sum(1 for t in truths if t.potential)
    print(f"synth: wrote {len(truths)} buildings ({n_pot} with potential) "
          f"and supporting layers to {args.out}")
    print(f"synth: run the pipeline with --config {os.path.join(args.out, 'config.txt')}")
    return 0


# ---------------------------------------------------------------------------
# extract
# ---------------------------------------------------------------------------

def cmd_extract(cfg):
    cfg.require("points", "footprints")
    pc = read_point_cloud(cfg.points)
    buildings = read_footprints(cfg.footprints)
    extraction = extract_all(pc, buildings, cfg.roof_params())
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_raster_asc(extraction.dsm, _out_path(cfg, "dsm.asc"))

    th = cfg.thresholds()
    seg_rows, cell_rows = [], []
    for seg in sorted(extraction.segments, key=lambda s: (s.building_id, s.seg_id)):
        qualifying = (seg.slope_deg < th.slope_max_deg
                      and seg.area_m2 > th.area_min_m2)
        a, b, c = seg.plane
        seg_rows.append([seg.building_id, seg.seg_id,
                         "true" if qualifying else "false",
                         _f(seg.slope_deg), _f(seg.area_m2),
                         str(len(seg.cells)), _f(a), _f(b), _f(c)])
        for row, col in seg.cells:
            cell_rows.append([seg.building_id, seg.seg_id, str(row), str(col)])
    _write_rows(_out_path(cfg, "segments.csv"),
                ("building_id", "seg_id", "qualifying", "slope_deg", "area_m2",
                 "n_cells", "plane_a", "plane_b", "plane_c"), seg_rows)
    _write_rows(_out_path(cfg, "cells.csv"),
                ("building_id", "seg_id", "row", "col"), cell_rows)

    b_rows = []
    for b in sorted(buildings, key=lambda b: b.id):
        dec = extraction.decisions[b.id]
        b_rows.append([b.id, "true" if dec.potential else "false",
                       "|".join(sorted(dec.reasons)),
                       _f(dec.greenable_m2), _f(extraction.heights[b.id]),
                       str(b.age_years), b.category])
    _write_rows(_out_path(cfg, "buildings.csv"),
                ("id", "potential", "reasons", "greenable_m2", "height_m",
                 "age_years", "category"), b_rows)

    n_pot = sum(1 for d in extraction.decisions.values() if d.potential)
    greenable = sum(d.greenable_m2 for d in extraction.decisions.values()
                    if d.potential)
    share = 100.0 * n_pot / len(buildings) if buildings else 0.0
    print(f"extract: {n_pot}/{len(buildings)} buildings with potential "
          f"({share:.1f} %), greenable roof area {greenable:.1f} m2")
    return 0


# ---------------------------------------------------------------------------
# indicators
# ---------------------------------------------------------------------------

def _load_segments(cfg):
    """Rebuild RoofSegment objects from the extract stage's tables."""
    seg_rows = _read_rows(_artifact(cfg, "segments.csv", "extract"))
    cell_rows = _read_rows(_artifact(cfg, "cells.csv", "extract"))
    cells_by_seg = {}
    for row in cell_rows:
        key = (row["building_id"], row["seg_id"])
        cells_by_seg.setdefault(key, []).append((int(row["row"]), int(row["col"])))
    segments, qualifying = {}, {}
    for row in seg_rows:
        key = (row["building_id"], row["seg_id"])
        seg = RoofSegment(cells_by_seg.get(key, []),
                          (float(row["plane_a"]), float(row["plane_b"]),
                           float(row["plane_c"])),
                          float(row["slope_deg"]), float(row["area_m2"]),
                          building_id=row["building_id"], seg_id=row["seg_id"])
        segments.setdefault(row["building_id"], []).append(seg)
        if row["qualifying"] == "true":
            qualifying.setdefault(row["building_id"], []).append(seg)
    return segments, qualifying


def _interp_template(pc, cell):
    x_min, y_min = pc.xyz[:, 0].min(), pc.xyz[:, 1].min()
    x_max, y_max = pc.xyz[:, 0].max(), pc.xyz[:, 1].max()
    ox = math.floor(x_min / cell) * cell
    oy = math.floor(y_min / cell) * cell
    ncols = int(math.floor((x_max - ox) / cell)) + 1
    nrows = int(math.floor((y_max - oy) / cell)) + 1
    return RasterGrid(ox, oy, cell, np.zeros((nrows, ncols)))


def cmd_indicators(cfg):
    cfg.require("points", "footprints", "roads", "income_stations",
                "precip_stations", "temp_spring", "temp_summer",
                "temp_autumn", "temp_winter")
    dsm = read_raster_asc(_artifact(cfg, "dsm.asc", "extract"))
    _, qualifying = _load_segments(cfg)
    building_rows = _read_rows(_artifact(cfg, "buildings.csv", "extract"))
    potential_ids = [r["id"] for r in building_rows if r["potential"] == "true"]

    pc = read_point_cloud(cfg.points)
    buildings = {b.id: b for b in read_footprints(cfg.footprints)}
    roads = read_roads(cfg.roads)

    mask_base = build_greenspace_mask(pc, None, cell=cfg.mask_cell)
    green_segs = [s for bid in potential_ids for s in qualifying.get(bid, [])]
    mask_green = build_greenspace_mask(pc, green_segs, cell=cfg.mask_cell,
                                       roof_grid=dsm)
    write_raster_asc(mask_base, _out_path(cfg, "greenspace_base.asc"))
    write_raster_asc(mask_green, _out_path(cfg, "greenspace_greened.asc"))

    template = _interp_template(pc, cfg.interp_cell)
    income_surface = interpolate_grid(
        SampleSet.from_points(read_xy_value(cfg.income_stations)), template,
        method=cfg.interp_method)
    precip_surface = interpolate_grid(
        SampleSet.from_points(read_xy_value(cfg.precip_stations)), template,
        method=cfg.interp_method)
    write_raster_asc(income_surface, _out_path(cfg, "income_surface.asc"))
    write_raster_asc(precip_surface, _out_path(cfg, "precip_surface.asc"))

    temps = {}
    for season in SEASONS:
        grid = read_raster_asc(getattr(cfg, f"temp_{season}"))
        if np.isnan(grid.values).any():
            grid = fill_raster_nodata(grid)
        temps[season] = grid

    raws = []
    for bid in sorted(potential_ids):
        raws.append(measure_building(
            buildings[bid], qualifying.get(bid, []), mask_green, dsm, roads,
            income_surface, temps, precip_surface, radius=cfg.gc_radius))
    vectors = normalize_indicators(raws, road_cap=cfg.road_cap_m)

    rows = []
    for raw in raws:
        vec = vectors[raw.building_id]
        rows.append([raw.building_id, _f(raw.greenspace), _f(raw.road_distance_m),
                     raw.category, _f(raw.income)]
                    + [_f(t) for t in raw.seasonal_temps]
                    + [_f(raw.precipitation)]
                    + [_f(getattr(vec, name)) for name in IND_FIELDS])
    _write_rows(_out_path(cfg, "indicators.csv"),
                ("id", "gc_raw", "road_dist_m", "category", "income_raw",
                 "temp_spring_raw", "temp_summer_raw", "temp_autumn_raw",
                 "temp_winter_raw", "precip_raw", "ind_greenspace",
                 "ind_road_dist", "ind_category", "ind_income",
                 "ind_temperature", "ind_precip"), rows)
    print(f"indicators: scored {len(raws)} potential buildings")
    return 0


# ---------------------------------------------------------------------------
# prioritize
# ---------------------------------------------------------------------------

def _read_indicator_vectors(cfg, prior="indicators"):
    rows = _read_rows(_artifact(cfg, "indicators.csv", prior))
    ids = [r["id"] for r in rows]
    matrix = np.array([[float(r["ind_" + short]) for short in
                        ("greenspace", "road_dist", "category", "income",
                         "temperature", "precip")] for r in rows])
    return ids, matrix, rows


def cmd_prioritize(cfg):
    ids, matrix, _ = _read_indicator_vectors(cfg)
    if not ids:
        raise ComputationError("no potential buildings to prioritize")
    weights = {}
    for scheme in WEIGHT_SCHEMES:
        if len(ids) < 2:
            # column statistics need at least two buildings; every scheme
            # degenerates to equal weights for a single row
            weights[scheme] = WeightVector.equal()
        else:
            weights[scheme] = WeightVector.from_array(compute_weights(matrix, scheme))

    w_rows = []
    for scheme in WEIGHT_SCHEMES:
        arr = weights[scheme].as_array()
        w_rows.append([scheme, "true" if scheme == cfg.scheme else "false"]
                      + [f"{w:.9f}" for w in arr])
    _write_rows(_out_path(cfg, "weights.csv"),
                ("scheme", "active") + WEIGHT_COLUMNS, w_rows)

    per_scheme = {s: matrix @ weights[s].as_array() for s in WEIGHT_SCHEMES}
    active = {bid: float(p) for bid, p in zip(ids, per_scheme[cfg.scheme])}
    ranked = rank_buildings(active)
    order = {s.building_id: s for s in ranked}
    p_rows = []
    for i, bid in enumerate(ids):
        s = order[bid]
        p_rows.append([bid] + [_f(per_scheme[sch][i]) for sch in WEIGHT_SCHEMES]
                      + [_f(s.priority), str(s.rank), _f(s.percentile)])
    _write_rows(_out_path(cfg, "priorities.csv"),
                ("id", "p_equal", "p_entropy", "p_cv", "p_critic", "priority",
                 "rank", "percentile"), p_rows)

    summary = priority_summary(ranked)
    print(f"prioritize: scheme={cfg.scheme}, {summary.count} buildings, "
          f"share above 0.5 = {100 * summary.share_above_half:.1f} %, "
          f"mean {summary.mean_priority:.3f}, max {summary.max_priority:.3f}")
    return 0


# ---------------------------------------------------------------------------
# benefits
# ---------------------------------------------------------------------------

def cmd_benefits(cfg):
    cfg.require("population")
    building_rows = _read_rows(_artifact(cfg, "buildings.csv", "extract"))
    mask_base = read_raster_asc(_artifact(cfg, "greenspace_base.asc", "indicators"))
    mask_green = read_raster_asc(_artifact(cfg, "greenspace_greened.asc", "indicators"))
    ind_rows = _read_rows(_artifact(cfg, "indicators.csv", "indicators"))

    population = population_grid_from_points(read_xy_value(cfg.population),
                                             cell=cfg.population_cell)
    exposure_base = greenspace_exposure(mask_base, population, radius=cfg.gc_radius)
    exposure_green = greenspace_exposure(mask_green, population, radius=cfg.gc_radius)

    potential = [r for r in building_rows if r["potential"] == "true"]
    greenable = sum(float(r["greenable_m2"]) for r in potential)
    volumes = [(float(r["greenable_m2"]), float(r["height_m"])) for r in potential]
    report = assemble_report(greenable, exposure_base, exposure_green, volumes,
                             cooling=cfg.cooling(), econ=cfg.econ())

    rows = [
        ["potential_buildings", _f(len(potential)), "count"],
        ["greenable_area_m2", _f(report.greenable_area_m2), "m2"],
        ["exposure_baseline", _f(report.exposure_baseline), "fraction"],
        ["exposure_greened", _f(report.exposure_greened), "fraction"],
        ["carbon_direct_kg", _f(report.carbon_direct_kg), "kg_per_yr"],
        ["energy_joules", _f(report.energy_joules), "J_per_yr"],
        ["energy_kwh", _f(report.energy_kwh), "kWh_per_yr"],
        ["carbon_indirect_kg", _f(report.carbon_indirect_kg), "kg_per_yr"],
        ["carbon_total_kg", _f(report.carbon_total_kg), "kg_per_yr"],
        ["value_energy_hkd", _f(report.value_energy_hkd), "HKD_per_yr"],
        ["value_carbon_hkd", _f(report.value_carbon_hkd), "HKD_per_yr"],
        ["value_total_hkd", _f(report.value_total_hkd), "HKD_per_yr"],
    ]
    _write_rows(_out_path(cfg, "benefits.csv"), ("metric", "value", "unit"), rows)

    pairs = [(float(r["income_raw"]), float(r["gc_raw"])) for r in ind_rows]
    reg_rows = []
    try:
        reg = income_greenspace_regression(pairs)
        reg_rows.append([f"{reg.slope:.9g}", f"{reg.intercept:.9g}",
                         _f(reg.pearson_r), _f(reg.p_value), str(reg.n)])
        reg_note = (f"regression: r = {reg.pearson_r:.3f}, "
                    f"p = {reg.p_value:.4g}, n = {reg.n}")
    except ValueError as exc:
        reg_note = f"regression: skipped ({exc})"
    _write_rows(_out_path(cfg, "regression.csv"),
                ("slope", "intercept", "pearson_r", "p_value", "n"), reg_rows)

    print(f"benefits: exposure {exposure_base:.3f} -> {exposure_green:.3f}, "
          f"carbon {report.carbon_total_kg / 1000.0:.1f} t/yr, "
          f"value HK${report.value_total_hkd:,.0f}/yr")
    print(reg_note)
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def _benefit_map(cfg):
    rows = _read_rows(_artifact(cfg, "benefits.csv", "benefits"))
    return {r["metric"]: float(r["value"]) for r in rows}


def cmd_report(cfg):
    cfg.require("footprints")
    building_rows = _read_rows(_artifact(cfg, "buildings.csv", "extract"))
    seg_rows = _read_rows(_artifact(cfg, "segments.csv", "extract"))
    ind_rows = {r["id"]: r for r in
                _read_rows(_artifact(cfg, "indicators.csv", "indicators"))}
    pri_rows = {r["id"]: r for r in
                _read_rows(_artifact(cfg, "priorities.csv", "prioritize"))}
    weight_rows = _read_rows(_artifact(cfg, "weights.csv", "prioritize"))
    metrics = _benefit_map(cfg)
    reg_rows = _read_rows(_artifact(cfg, "regression.csv", "benefits"))

    min_slope = {}
    for r in seg_rows:
        bid = r["building_id"]
        s = float(r["slope_deg"])
        if bid not in min_slope or s < min_slope[bid]:
            min_slope[bid] = s

    footprints = {b.id: b.footprint for b in read_footprints(cfg.footprints)}
    rows = []
    for r in sorted(building_rows, key=lambda r: r["id"]):
        bid = r["id"]
        ind = ind_rows.get(bid)
        pri = pri_rows.get(bid)
        rows.append(BuildingReportRow(
            id=bid,
            potential=r["potential"] == "true",
            roof_area_m2=float(r["greenable_m2"]),
            slope_deg=min_slope.get(bid),
            height_m=float(r["height_m"]),
            ind_greenspace=float(ind["ind_greenspace"]) if ind else None,
            ind_road_dist=float(ind["ind_road_dist"]) if ind else None,
            ind_category=float(ind["ind_category"]) if ind else None,
            ind_income=float(ind["ind_income"]) if ind else None,
            ind_temperature=float(ind["ind_temperature"]) if ind else None,
            ind_precip=float(ind["ind_precip"]) if ind else None,
            priority=float(pri["priority"]) if pri else None,
        ))
    write_building_report(rows, _out_path(cfg, "buildings_report.csv"),
                          _out_path(cfg, "buildings_report.geojson"), footprints)

    text = _render_report(cfg, building_rows, rows, weight_rows, metrics, reg_rows)
    with open(_out_path(cfg, "report.md"), "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"report: wrote {_out_path(cfg, 'report.md')} and the per-building table")
    return 0


def _render_report(cfg, building_rows, report_rows, weight_rows, metrics, reg_rows):
    n = len(building_rows)
    n_pot = int(metrics["potential_buildings"])
    share = 100.0 * n_pot / n if n else 0.0
    lines = []
    w = lines.append
    w("# Roof greening assessment")
    w("")
    w("## Extraction")
    w("")
    w(f"- buildings analyzed: {n}")
    w(f"- buildings with greening potential: {n_pot} ({share:.1f} %)")
    w(f"- greenable roof area: {metrics['greenable_area_m2']:,.1f} m2 "
      f"({metrics['greenable_area_m2'] / 1e6:.4f} km2)")
    w("")
    w("## Priorities")
    w("")
    w("| scheme | active | " + " | ".join(WEIGHT_COLUMNS) + " |")
    w("|---|---|" + "---|" * len(WEIGHT_COLUMNS))
    for r in weight_rows:
        w("| " + r["scheme"] + " | " + r["active"] + " | "
          + " | ".join(f"{float(r[c]):.4f}" for c in WEIGHT_COLUMNS) + " |")
    scored = [r for r in report_rows if r.priority is not None]
    if scored:
        ps = [r.priority for r in scored]
        above = 100.0 * sum(1 for p in ps if p > 0.5) / len(ps)
        w("")
        w(f"- scored buildings: {len(ps)}")
        w(f"- share with priority above 0.5: {above:.1f} %")
        w(f"- mean priority: {sum(ps) / len(ps):.3f}, max: {max(ps):.3f}")
    w("")
    w("## Benefits")
    w("")
    w(f"- greenspace exposure: {100 * metrics['exposure_baseline']:.1f} % baseline, "
      f"{100 * metrics['exposure_greened']:.1f} % after greening")
    w(f"- direct carbon uptake: {metrics['carbon_direct_kg'] / 1000.0:,.2f} t/yr")
    w(f"- cooling energy saved: {metrics['energy_kwh']:,.1f} kWh/yr")
    w(f"- indirect carbon reduction: {metrics['carbon_indirect_kg'] / 1000.0:,.2f} t/yr")
    w(f"- total carbon reduction: {metrics['carbon_total_kg'] / 1000.0:,.2f} t/yr")
    w(f"- money value: HK${metrics['value_energy_hkd']:,.0f} energy + "
      f"HK${metrics['value_carbon_hkd']:,.0f} carbon = "
      f"HK${metrics['value_total_hkd']:,.0f}/yr")
    w("")
    w("## Income and greenspace")
    w("")
    if reg_rows:
        r = reg_rows[0]
        w(f"- linear fit of coverage on income: slope {float(r['slope']):.3e}, "
          f"r = {float(r['pearson_r']):.3f}, p = {float(r['p_value']):.4g}, "
          f"n = {r['n']}")
    else:
        w("- regression not computed (too few scored buildings or no spread)")
    w("")
    w("## Reference comparison")
    w("")
    w("Values reported by the Hong Kong 2021 citywide study, for orientation.")
    w("This run's inputs are a synthetic scene, so magnitudes are not")
    w("expected to match; the mechanism, not the city, is what reruns here.")
    w("")
    w("| quantity | reference value |")
    w("|---|---|")
    for name, value in HK_REFERENCE:
        w(f"| {name} | {value} |")
    w("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="greenprior",
        description="Roof greening potential, priority, and benefit pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic city dataset")
    p_synth.add_argument("--out", default="city", help="dataset directory")
    p_synth.add_argument("--seed", type=int, default=42)
    p_synth.add_argument("--buildings", type=int, default=60)

    for name, help_text in (
            ("extract", "roof segmentation and potential screening"),
            ("indicators", "six demand indicators per potential building"),
            ("prioritize", "weighting schemes and priority ranking"),
            ("benefits", "exposure, carbon, energy, and money accounting"),
            ("report", "final per-building table and report.md")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None, help="override out_dir")
        p.add_argument("--scheme", default=None, choices=WEIGHT_SCHEMES)
        p.add_argument("--cell", type=float, default=None,
                       help="override dsm_cell in meters")

    return parser


_COMMANDS = {
    "extract": cmd_extract,
    "indicators": cmd_indicators,
    "prioritize": cmd_prioritize,
    "benefits": cmd_benefits,
    "report": cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(args)
        cfg = load_config(args.config, overrides={
            "out_dir": args.out, "scheme": args.scheme, "dsm_cell": args.cell})
        os.makedirs(cfg.out_dir, exist_ok=True)
        return _COMMANDS[args.command](cfg)
    except ComputationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
