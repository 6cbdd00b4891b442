"""City-level benefit accounting for a roof greening programme.

Covers population-weighted greenspace exposure, direct carbon uptake by the
new vegetation, cooling-driven electricity savings with their indirect
emission cut, the money value of both, and the income-versus-greenspace
regression used to examine equity of access.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .geocore import ComputationError, RasterGrid
from .indicators import GC_RADIUS_DEFAULT, greenspace_coverage

KWH_PER_JOULE = 1.0 / 3.6e6


@dataclass(frozen=True)
class CoolingParams:
    """Seasonal cooling assumptions behind the energy-saving estimate.

    Temperature reductions are per-hour values by day type; rainy days
    contribute nothing. The non-rainy remainder of the season is split
    between sunny and cloudy days by sunny_fraction.
    """

    dt_sunny: float = 0.15
    dt_cloudy: float = 0.10
    dt_rainy: float = 0.0
    c_air: float = 1004.0
    d_air: float = 1.29
    season_days: int = 180
    rainy_days: int = 30
    sunny_fraction: float = 0.5
    hours_per_day: float = 24.0

    def __post_init__(self):
        for name in ("dt_sunny", "dt_cloudy", "dt_rainy", "c_air", "d_air",
                     "season_days", "rainy_days", "hours_per_day"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.rainy_days > self.season_days:
            raise ValueError("rainy_days cannot exceed season_days")
        if not 0.0 <= self.sunny_fraction <= 1.0:
            raise ValueError("sunny_fraction must lie in [0, 1]")

    def degree_hours(self):
        """Season total of temperature reduction times time, in degC*h."""
        non_rainy = self.season_days - self.rainy_days
        sunny = non_rainy * self.sunny_fraction
        cloudy = non_rainy - sunny
        per_day_split = (sunny * self.dt_sunny + cloudy * self.dt_cloudy
                         + self.rainy_days * self.dt_rainy)
        return per_day_split * self.hours_per_day


@dataclass(frozen=True)
class EconParams:
    """Conversion factors from physical savings to emissions and money."""

    co2_uptake_kg_per_m2: float = 1.46
    co2_kg_per_kwh: float = 0.785
    tariff_hkd_per_kwh: float = 1.29
    carbon_price_hkd_per_ton: float = 65.0

    def __post_init__(self):
        for name in ("co2_uptake_kg_per_m2", "co2_kg_per_kwh",
                     "tariff_hkd_per_kwh", "carbon_price_hkd_per_ton"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class BenefitReport:
    greenable_area_m2: float
    exposure_baseline: float
    exposure_greened: float
    carbon_direct_kg: float
    energy_joules: float
    energy_kwh: float
    carbon_indirect_kg: float
    carbon_total_kg: float
    value_energy_hkd: float
    value_carbon_hkd: float
    value_total_hkd: float

    def __post_init__(self):
        for name in ("exposure_baseline", "exposure_greened"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        if self.carbon_total_kg != self.carbon_direct_kg + self.carbon_indirect_kg:
            raise ValueError("carbon_total_kg must equal the sum of its parts")
        if self.value_total_hkd != self.value_energy_hkd + self.value_carbon_hkd:
            raise ValueError("value_total_hkd must equal the sum of its parts")


def greenspace_exposure(mask, population, radius=GC_RADIUS_DEFAULT):
    """Population-weighted mean greenspace coverage over populated cells.

    Each populated cell of the population grid contributes its coverage at
    the cell center, weighted by its head count. NaN population cells are
    treated as empty.
    """
    if not isinstance(population, RasterGrid):
        raise TypeError("population must be a RasterGrid")
    pop = np.nan_to_num(population.values, nan=0.0)
    if pop.min() < 0:
        raise ValueError("population grid contains negative counts")
    total = float(pop.sum())
    if total <= 0:
        raise ComputationError("population grid has zero total population")
    weighted = 0.0
    for row, col in zip(*np.nonzero(pop > 0)):
        x, y = population.cell_center(int(row), int(col))
        weighted += pop[row, col] * greenspace_coverage(mask, x, y, radius)
    return weighted / total


def carbon_sequestration(greenable_area_m2, co2_uptake_kg_per_m2=1.46):
    """Annual CO2 uptake (kg) of the greened area: plain product."""
    if greenable_area_m2 < 0:
        raise ValueError("greenable area must be non-negative")
    return greenable_area_m2 * co2_uptake_kg_per_m2


def energy_savings(buildings, params=None):
    """Seasonal cooling energy saved over a set of (area_m2, height_m) pairs.

    The seasonal degree-hour total times the volumetric heat capacity of air
    times total building volume. Returns (joules, kilowatt_hours).
    """
    params = params or CoolingParams()
    volume = 0.0
    for area, height in buildings:
        if area < 0 or height < 0:
            raise ValueError("building area and height must be non-negative")
        volume += area * height
    joules = params.degree_hours() * params.c_air * params.d_air * volume
    return joules, joules * KWH_PER_JOULE


def indirect_carbon(energy_kwh, co2_kg_per_kwh=0.785):
    """Avoided emissions (kg CO2) for energy no longer generated."""
    if energy_kwh < 0:
        raise ValueError("energy must be non-negative")
    return energy_kwh * co2_kg_per_kwh


def economic_value(energy_kwh, carbon_total_kg, econ=None):
    """Money value of the savings: (energy HK$, carbon HK$, total HK$)."""
    econ = econ or EconParams()
    value_energy = energy_kwh * econ.tariff_hkd_per_kwh
    value_carbon = (carbon_total_kg / 1000.0) * econ.carbon_price_hkd_per_ton
    return value_energy, value_carbon, value_energy + value_carbon


def assemble_report(greenable_area_m2, exposure_baseline, exposure_greened,
                    buildings, cooling=None, econ=None):
    """Run the whole benefit chain and package it with exact totals."""
    econ = econ or EconParams()
    carbon_direct = carbon_sequestration(greenable_area_m2,
                                         econ.co2_uptake_kg_per_m2)
    joules, kwh = energy_savings(buildings, cooling)
    carbon_indirect = indirect_carbon(kwh, econ.co2_kg_per_kwh)
    carbon_total = carbon_direct + carbon_indirect
    value_energy, value_carbon, value_total = economic_value(
        kwh, carbon_total, econ)
    return BenefitReport(
        greenable_area_m2=greenable_area_m2,
        exposure_baseline=exposure_baseline,
        exposure_greened=exposure_greened,
        carbon_direct_kg=carbon_direct,
        energy_joules=joules,
        energy_kwh=kwh,
        carbon_indirect_kg=carbon_indirect,
        carbon_total_kg=carbon_total,
        value_energy_hkd=value_energy,
        value_carbon_hkd=value_carbon,
        value_total_hkd=value_total,
    )


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    pearson_r: float
    p_value: float
    n: int


def income_greenspace_regression(pairs):
    """Ordinary least squares of coverage on income with significance.

    Returns slope, intercept, Pearson r, and the two-sided p-value of the
    t-statistic t = r * sqrt((n - 2) / (1 - r^2)) with n - 2 degrees of
    freedom, computed through the regularized incomplete beta function.
    """
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise ValueError("need at least 3 (income, coverage) pairs")
    if not np.all(np.isfinite(arr)):
        raise ValueError("pairs contain non-finite values")
    x, y = arr[:, 0], arr[:, 1]
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise ValueError("zero variance in regression input")
    n = len(x)
    xc = x - x.mean()
    yc = y - y.mean()
    slope = float(np.dot(xc, yc) / np.dot(xc, xc))
    intercept = float(y.mean() - slope * x.mean())
    r = float(np.dot(xc, yc) / math.sqrt(np.dot(xc, xc) * np.dot(yc, yc)))
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        p = 0.0
    else:
        dof = n - 2
        t2 = r * r * dof / (1.0 - r * r)
        p = float(special.betainc(dof / 2.0, 0.5, dof / (dof + t2)))
    return RegressionResult(slope, intercept, r, p, n)


def population_grid_from_points(points, cell=100.0):
    """Accumulate (x, y, count) triples into a population raster.

    The grid origin snaps to multiples of the cell size and the extent is
    padded by one cell so every point lands strictly inside.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] == 0:
        raise ValueError("expected a non-empty array of (x, y, count) rows")
    if arr[:, 2].min() < 0:
        raise ValueError("population counts must be non-negative")
    origin_x = math.floor(arr[:, 0].min() / cell) * cell
    origin_y = math.floor(arr[:, 1].min() / cell) * cell
    ncols = int(math.floor((arr[:, 0].max() - origin_x) / cell)) + 1
    nrows = int(math.floor((arr[:, 1].max() - origin_y) / cell)) + 1
    values = np.zeros((nrows, ncols))
    cols = np.floor((arr[:, 0] - origin_x) / cell).astype(int)
    rows = np.floor((arr[:, 1] - origin_y) / cell).astype(int)
    np.add.at(values, (rows, cols), arr[:, 2])
    return RasterGrid(origin_x, origin_y, cell, values)
