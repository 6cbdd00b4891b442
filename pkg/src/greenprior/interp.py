"""Scattered-data interpolation: inverse distance weighting and ordinary
kriging, plus the variogram machinery kriging needs.

Sample sets are canonicalized on construction (exact duplicate coordinates
averaged, then sorted), which makes every downstream prediction independent
of input file ordering.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .geocore import ComputationError, RasterGrid

MATCH_TOL = 1e-9  # queries closer than this to a sample return it exactly

VARIOGRAM_KINDS = ("spherical", "exponential")


@dataclass
class SampleSet:
    """Scattered point samples of one quantity, in canonical order."""

    xy: np.ndarray
    values: np.ndarray
    units: str = ""
    _tree: cKDTree | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.xy.ndim != 2 or self.xy.shape[1] != 2 or self.xy.shape[0] == 0:
            raise ValueError("samples must be a non-empty (n, 2) array")
        if self.values.shape != (self.xy.shape[0],):
            raise ValueError("one value per sample required")
        if not (np.isfinite(self.xy).all() and np.isfinite(self.values).all()):
            raise ValueError("samples must be finite")

    @classmethod
    def from_points(cls, arr: np.ndarray, units: str = "") -> "SampleSet":
        """Build from (n, 3) rows of x, y, value.

        Rows at bit-identical coordinates are averaged; samples are then
        sorted by (x, y) so file order never leaks into predictions.
        """
        arr = np.asarray(arr, dtype=float)
        coords, inverse = np.unique(arr[:, :2], axis=0, return_inverse=True)
        sums = np.zeros(coords.shape[0])
        counts = np.zeros(coords.shape[0])
        np.add.at(sums, inverse, arr[:, 2])
        np.add.at(counts, inverse, 1.0)
        values = sums / counts
        order = np.lexsort((coords[:, 1], coords[:, 0]))
        return cls(coords[order], values[order], units)

    def __len__(self) -> int:
        return self.xy.shape[0]

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.xy)
        return self._tree

    def nearest(self, x: float, y: float, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Distances and indices of the k nearest samples (k clamped to n)."""
        k = min(k, len(self))
        d, idx = self.tree.query([x, y], k=k)
        return np.atleast_1d(d), np.atleast_1d(idx)


# ---------------------------------------------------------------------------
# inverse distance weighting
# ---------------------------------------------------------------------------

def idw_predict(samples: SampleSet, x: float, y: float, power: float = 2.0,
                k_neighbors: int = 12) -> float:
    d, idx = samples.nearest(x, y, k_neighbors)
    if d[0] < MATCH_TOL:
        return float(samples.values[idx[0]])
    w = d ** (-power)
    return float(np.sum(w * samples.values[idx]) / np.sum(w))


# ---------------------------------------------------------------------------
# variograms
# ---------------------------------------------------------------------------

def empirical_semivariogram(samples: SampleSet, n_bins: int = 15,
                            max_dist: float | None = None) -> list[tuple[float, float, int]]:
    """Binned semivariance of sample pairs.

    Returns (mean pair distance, semivariance, pair count) per nonempty
    bin, ordered by lag. max_dist defaults to half the bounding-box
    diagonal, the usual rule of thumb.
    """
    n = len(samples)
    if n < 2:
        raise ValueError("need at least 2 samples for a semivariogram")
    if max_dist is None:
        span = samples.xy.max(axis=0) - samples.xy.min(axis=0)
        max_dist = float(np.hypot(span[0], span[1])) / 2.0
        if max_dist <= 0:
            raise ValueError("all samples at one location")
    d = pdist(samples.xy)
    iu, ju = np.triu_indices(n, k=1)
    sq = 0.5 * (samples.values[iu] - samples.values[ju]) ** 2
    keep = (d > 0) & (d <= max_dist)
    d, sq = d[keep], sq[keep]
    edges = np.linspace(0.0, max_dist, n_bins + 1)
    which = np.clip(np.searchsorted(edges, d, side="left") - 1, 0, n_bins - 1)
    out = []
    for b in range(n_bins):
        m = which == b
        if not m.any():
            continue
        out.append((float(d[m].mean()), float(sq[m].mean()), int(m.sum())))
    return out


@dataclass
class VariogramModel:
    """Isotropic semivariogram: nugget + partial sill shaped by range."""

    kind: str
    nugget: float
    sill: float
    range_m: float
    degenerate: bool = False

    def __post_init__(self):
        if self.kind not in VARIOGRAM_KINDS:
            raise ValueError(f"unknown variogram kind {self.kind!r}")
        if self.nugget < 0 or self.sill <= self.nugget or self.range_m <= 0:
            raise ValueError("variogram needs 0 <= nugget < sill and range > 0")

    def gamma(self, h):
        """Semivariance at lag h (array friendly); exactly 0 at h = 0."""
        h = np.asarray(h, dtype=float)
        partial = self.sill - self.nugget
        ratio = h / self.range_m
        if self.kind == "spherical":
            shape = np.where(ratio < 1.0, 1.5 * ratio - 0.5 * ratio ** 3, 1.0)
        else:
            shape = 1.0 - np.exp(-3.0 * ratio)
        out = np.where(h > 0, self.nugget + partial * shape, 0.0)
        return out if out.ndim else float(out)


def _linear_subfit(lags, gammas, weights, shape):
    """Weighted LS for (nugget, partial) given the range-shaped basis."""
    w = weights
    s11 = np.sum(w)
    s1f = np.sum(w * shape)
    sff = np.sum(w * shape * shape)
    s1g = np.sum(w * gammas)
    sfg = np.sum(w * shape * gammas)
    det = s11 * sff - s1f * s1f
    if abs(det) < 1e-12:
        nugget, partial = 0.0, max(s1g / s11, 1e-12)
    else:
        nugget = (sff * s1g - s1f * sfg) / det
        partial = (s11 * sfg - s1f * s1g) / det
    if nugget < 0:
        nugget = 0.0
        partial = sfg / sff if sff > 0 else 1e-12
    partial = max(partial, 1e-12)
    return nugget, partial


def fit_variogram(empirical: list[tuple[float, float, int]],
                  kind: str = "spherical") -> VariogramModel:
    """Fit nugget/sill/range to a binned semivariogram.

    Count-weighted least squares with a fixed multi-start over candidate
    ranges, then bounded local refinement; deterministic for a given input.
    All-zero curves come back flagged degenerate.
    """
    if kind not in VARIOGRAM_KINDS:
        raise ValueError(f"unknown variogram kind {kind!r}")
    if len(empirical) < 3:
        raise ValueError("need at least 3 semivariogram bins to fit")
    lags = np.array([e[0] for e in empirical])
    gammas = np.array([e[1] for e in empirical])
    weights = np.array([float(e[2]) for e in empirical])
    max_lag = float(lags.max())
    if np.all(gammas <= 1e-15):
        return VariogramModel(kind, 0.0, 1e-12, max_lag, degenerate=True)

    def shape_of(r):
        ratio = lags / r
        if kind == "spherical":
            return np.where(ratio < 1.0, 1.5 * ratio - 0.5 * ratio ** 3, 1.0)
        return 1.0 - np.exp(-3.0 * ratio)

    best = None
    for r in np.geomspace(0.25 * float(lags.min()), 2.0 * max_lag, 24):
        nugget, partial = _linear_subfit(lags, gammas, weights, shape_of(r))
        sse = float(np.sum(weights * (nugget + partial * shape_of(r) - gammas) ** 2))
        if best is None or sse < best[0]:
            best = (sse, nugget, partial, r)
    _, n0, p0, r0 = best

    def residuals(theta):
        nugget, partial, r = theta
        ratio = lags / r
        if kind == "spherical":
            shape = np.where(ratio < 1.0, 1.5 * ratio - 0.5 * ratio ** 3, 1.0)
        else:
            shape = 1.0 - np.exp(-3.0 * ratio)
        return np.sqrt(weights) * (nugget + partial * shape - gammas)

    # range capped at twice the observed lag span: a larger value would make
    # the sill an extrapolation the data cannot support
    lo = [0.0, 1e-12, 0.01 * float(lags.min())]
    hi = [np.inf, np.inf, 2.0 * max_lag]
    sol = scipy.optimize.least_squares(residuals, [n0, max(p0, 1e-10), r0],
                                       bounds=(lo, hi), method="trf")
    nugget, partial, range_m = sol.x
    return VariogramModel(kind, float(nugget), float(nugget + max(partial, 1e-12)),
                          float(range_m))


# ---------------------------------------------------------------------------
# ordinary kriging
# ---------------------------------------------------------------------------

def _ok_solve(samples: SampleSet, model: VariogramModel, x: float, y: float,
              k_neighbors: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Neighbor indices, kriging weights, and the Lagrange multiplier."""
    d, idx = samples.nearest(x, y, k_neighbors)
    pts = samples.xy[idx]
    k = len(idx)
    pair = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    off = pair[np.triu_indices(k, 1)]
    if off.size and off.min() < MATCH_TOL:
        ii, jj = np.triu_indices(k, 1)
        flat = int(np.argmin(off))
        a, b = idx[ii[flat]], idx[jj[flat]]
        raise ComputationError(
            f"duplicate sample coordinates at {tuple(samples.xy[a])} "
            f"(samples {a} and {b}); kriging system is singular")
    A = np.empty((k + 1, k + 1))
    A[:k, :k] = model.gamma(pair)
    A[k, :] = 1.0
    A[:, k] = 1.0
    A[k, k] = 0.0
    rhs = np.empty(k + 1)
    rhs[:k] = model.gamma(d)
    rhs[k] = 1.0
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        raise ComputationError("kriging system is singular") from None
    return idx, sol[:k], float(sol[k])


def kriging_predict(samples: SampleSet, model: VariogramModel, x: float, y: float,
                    k_neighbors: int = 16) -> tuple[float, float]:
    """Ordinary-kriging estimate and variance at one location.

    Queries that coincide with a sample short-circuit to (value, 0); the
    estimator is exact there anyway, this just avoids the solve.
    """
    d, idx = samples.nearest(x, y, k_neighbors)
    if d[0] < MATCH_TOL:
        return float(samples.values[idx[0]]), 0.0
    nb_idx, w, mu = _ok_solve(samples, model, x, y, k_neighbors)
    dist = np.linalg.norm(samples.xy[nb_idx] - [x, y], axis=1)
    value = float(np.sum(w * samples.values[nb_idx]))
    variance = float(np.sum(w * model.gamma(dist)) + mu)
    return value, max(variance, 0.0)


# ---------------------------------------------------------------------------
# grid interpolation
# ---------------------------------------------------------------------------

def interpolate_grid(samples: SampleSet, template: RasterGrid, method: str = "kriging",
                     model: VariogramModel | None = None, idw_power: float = 2.0,
                     idw_k: int = 12, kriging_k: int = 16,
                     variogram_kind: str = "spherical") -> RasterGrid:
    """Predict a full raster (every cell center) from scattered samples."""
    if method not in ("idw", "kriging"):
        raise ValueError(f"unknown interpolation method {method!r}")
    if method == "kriging" and model is None:
        if len(samples) < 2:
            raise ValueError("kriging needs at least 2 samples")
        model = fit_variogram(empirical_semivariogram(samples), variogram_kind)
    out = np.empty((template.nrows, template.ncols))
    for row in range(template.nrows):
        cy = template.origin_y + (row + 0.5) * template.cell
        for col in range(template.ncols):
            cx = template.origin_x + (col + 0.5) * template.cell
            if method == "idw":
                out[row, col] = idw_predict(samples, cx, cy, idw_power, idw_k)
            else:
                out[row, col], _ = kriging_predict(samples, model, cx, cy, kriging_k)
    return RasterGrid(template.origin_x, template.origin_y, template.cell, out)


def fill_raster_nodata(grid: RasterGrid, kind: str = "spherical",
                       k_neighbors: int = 16) -> RasterGrid:
    """Krige the NaN cells of a raster from its valid cells.

    The valid cells become the sample set; filled-in values land only where
    the input had gaps, everything else is untouched.
    """
    rr, cc = np.nonzero(np.isfinite(grid.values))
    if rr.size < 3:
        raise ComputationError("too few valid cells to fill gaps")
    xs = grid.origin_x + (cc + 0.5) * grid.cell
    ys = grid.origin_y + (rr + 0.5) * grid.cell
    samples = SampleSet.from_points(np.column_stack([xs, ys, grid.values[rr, cc]]))
    gaps = ~np.isfinite(grid.values)
    if not gaps.any():
        return grid.copy()
    model = fit_variogram(empirical_semivariogram(samples), kind)
    out = grid.values.copy()
    for row, col in zip(*np.nonzero(gaps)):
        cx, cy = grid.cell_center(int(row), int(col))
        out[row, col], _ = kriging_predict(samples, model, cx, cy, k_neighbors)
    return RasterGrid(grid.origin_x, grid.origin_y, grid.cell, out)
