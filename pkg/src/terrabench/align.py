"""DEM-to-RGB registration, sensor-outlier repair, and pair scoring.

Outliers are flagged with a windowed median/MAD rule and filled by
inverse-distance interpolation from the nearest clean pixels; the
alignment score is a triage heuristic that pre-ranks pairs for the human
review queue and never auto-rejects anything.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.spatial import cKDTree

from .errors import (
    AllPixelsFlagged,
    CrsMismatch,
    DegenerateDataWarning,
    InsufficientOverlap,
)
from .raster import CrsId, GeoGrid, GeoTransform, bilinear_sample

DEFAULT_NODATA = -9999.0
DEFAULT_OUTLIER_WINDOW = 5
DEFAULT_OUTLIER_Z = 5.0
_MAD_SCALE = 1.4826
_MAD_FLOOR = 0.1  # meters

# luminance weights (ITU-R BT.601)
_LUM = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class OutlierMask:
    """Per-pixel boolean flags over a DEM."""

    flags: np.ndarray

    def __post_init__(self):
        if self.flags.ndim != 2 or self.flags.dtype != bool:
            raise ValueError("mask must be a 2-D boolean array")

    @property
    def height(self) -> int:
        return self.flags.shape[0]

    @property
    def width(self) -> int:
        return self.flags.shape[1]

    @property
    def count(self) -> int:
        return int(self.flags.sum())


@dataclass(frozen=True)
class AlignedPair:
    """An RGB tile and a DEM resampled onto the identical grid."""

    rgb: GeoGrid
    dem: GeoGrid
    alignment_score: float

    def __post_init__(self):
        if not self.rgb.same_grid_spec(self.dem):
            raise ValueError("rgb and dem must share width/height/geotransform/crs")
        if not 0.0 <= self.alignment_score <= 1.0:
            raise ValueError("alignment score must lie in [0, 1]")


@dataclass(frozen=True)
class GridSpec:
    """Target grid geometry for resampling."""

    width: int
    height: int
    geotransform: GeoTransform
    crs: CrsId

    @classmethod
    def of(cls, grid: GeoGrid) -> "GridSpec":
        return cls(grid.width, grid.height, grid.geotransform, grid.crs)


def _extent(gt: GeoTransform, width: int, height: int):
    xs = (gt.origin_x, gt.origin_x + (width - 1) * gt.pixel_dx)
    ys = (gt.origin_y, gt.origin_y + (height - 1) * gt.pixel_dy)
    return min(xs), max(xs), min(ys), max(ys)


def resample_to_grid(src: GeoGrid, target: GridSpec) -> GeoGrid:
    """Bilinearly resample ``src`` onto the target grid.

    Output pixels outside the source extent become nodata. Positions that
    coincide with source grid nodes reproduce the source value exactly.
    """
    if src.crs != target.crs:
        raise CrsMismatch(
            f"source {src.crs.to_string()} vs target {target.crs.to_string()}; reproject first"
        )
    sx0, sx1, sy0, sy1 = _extent(src.geotransform, src.width, src.height)
    tx0, tx1, ty0, ty1 = _extent(target.geotransform, target.width, target.height)
    ix = max(0.0, min(sx1, tx1) - max(sx0, tx0))
    iy = max(0.0, min(sy1, ty1) - max(sy0, ty0))
    target_area = (tx1 - tx0) * (ty1 - ty0)
    if target_area > 0:
        overlap = (ix * iy) / target_area
        if overlap < 0.95:
            raise InsufficientOverlap(f"extent overlap {overlap:.1%} below the 95% requirement")

    tgt = target.geotransform
    cols = np.arange(target.width, dtype=np.float64)
    rows = np.arange(target.height, dtype=np.float64)
    xs = tgt.origin_x + cols * tgt.pixel_dx
    ys = tgt.origin_y + rows * tgt.pixel_dy
    sgt = src.geotransform
    src_cols = (xs - sgt.origin_x) / sgt.pixel_dx
    src_rows = (ys - sgt.origin_y) / sgt.pixel_dy
    # snap to exact nodes so identity resampling is bit-exact
    src_cols = np.where(np.abs(src_cols - np.round(src_cols)) < 1e-7, np.round(src_cols), src_cols)
    src_rows = np.where(np.abs(src_rows - np.round(src_rows)) < 1e-7, np.round(src_rows), src_rows)
    cc, rr = np.meshgrid(src_cols, src_rows)

    inside = (rr >= 0) & (rr <= src.height - 1) & (cc >= 0) & (cc <= src.width - 1)
    nodata = src.nodata if src.nodata is not None else DEFAULT_NODATA
    out = np.empty((target.height, target.width, src.bands), dtype=src.data.dtype)
    for b in range(src.bands):
        band = src.band(b)
        vals = bilinear_sample(band, rr, cc)
        if src.nodata is not None:
            # any nodata corner poisons the interpolated value
            r0 = np.clip(np.floor(rr), 0, src.height - 1).astype(np.intp)
            c0 = np.clip(np.floor(cc), 0, src.width - 1).astype(np.intp)
            r1 = np.minimum(r0 + 1, src.height - 1)
            c1 = np.minimum(c0 + 1, src.width - 1)
            tainted = (
                (band[r0, c0] == src.nodata)
                | (band[r0, c1] == src.nodata)
                | (band[r1, c0] == src.nodata)
                | (band[r1, c1] == src.nodata)
            )
            vals = np.where(tainted, nodata, vals)
        vals = np.where(inside, vals, nodata)
        out[:, :, b] = vals.astype(src.data.dtype)
    return GeoGrid(out, tgt, target.crs, nodata if src.bands == 1 else src.nodata)


def detect_outliers(
    dem: GeoGrid,
    window: int = DEFAULT_OUTLIER_WINDOW,
    z_threshold: float = DEFAULT_OUTLIER_Z,
) -> OutlierMask:
    """Flag sensor spikes with a windowed robust z-score.

    A pixel is flagged when it deviates from its window median by more
    than ``z_threshold`` scaled MADs (MAD floored at 0.1 m). Nodata pixels
    are always flagged. The rule is exactly translation invariant.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 3")
    if z_threshold <= 0:
        raise ValueError("z_threshold must be positive")
    z = dem.band(0).astype(np.float64)
    invalid = ~np.isfinite(z)
    if dem.nodata is not None:
        invalid |= z == dem.nodata
    work = np.where(invalid, np.nan, z)
    half = window // 2
    padded = np.pad(work, half, mode="constant", constant_values=np.nan)
    windows = sliding_window_view(padded, (window, window))
    flat = windows.reshape(*work.shape, window * window)
    # windows with no valid pixel are flagged outright; zero-fill them so
    # nanmedian never sees an all-NaN slice (keeps this thread-safe, no
    # warning-state games)
    all_nan = np.isnan(flat).all(axis=-1)
    flat = np.where(all_nan[..., np.newaxis], 0.0, flat)
    med = np.nanmedian(flat, axis=-1)
    mad = np.nanmedian(np.abs(flat - med[..., np.newaxis]), axis=-1)
    scale = np.maximum(mad, _MAD_FLOOR) * _MAD_SCALE
    with np.errstate(invalid="ignore"):
        flags = np.abs(work - med) > z_threshold * scale
    return OutlierMask(flags | invalid | all_nan)


def repair_voids(dem: GeoGrid, mask: OutlierMask) -> GeoGrid:
    """Replace flagged pixels by inverse-distance-weighted interpolation.

    Each flagged pixel takes the IDW (power 2) combination of its k=8
    nearest unflagged pixels, so repairing twice with the same mask is a
    no-op. The result carries no nodata.
    """
    if mask.flags.shape != dem.band(0).shape:
        raise ValueError("mask dimensions must match the DEM")
    z = dem.band(0).astype(np.float32)
    flagged = mask.flags
    if not flagged.any():
        return GeoGrid(z.copy(), dem.geotransform, dem.crs, None)
    clean = ~flagged
    if not clean.any():
        raise AllPixelsFlagged("no unflagged pixels to interpolate from")
    clean_rc = np.argwhere(clean)
    bad_rc = np.argwhere(flagged)
    k = min(8, len(clean_rc))
    tree = cKDTree(clean_rc)
    dist, idx = tree.query(bad_rc, k=k)
    if k == 1:
        dist = dist[:, np.newaxis]
        idx = idx[:, np.newaxis]
    vals = z[clean_rc[:, 0], clean_rc[:, 1]][idx]
    w = 1.0 / np.maximum(dist, 1e-12) ** 2
    filled = (w * vals).sum(axis=1) / w.sum(axis=1)
    out = z.copy()
    out[bad_rc[:, 0], bad_rc[:, 1]] = filled.astype(np.float32)
    return GeoGrid(out, dem.geotransform, dem.crs, None)


def _gradient_magnitude(field: np.ndarray) -> np.ndarray:
    gy, gx = np.gradient(field.astype(np.float64))
    return np.hypot(gx, gy)


def alignment_score(rgb: GeoGrid, dem: GeoGrid) -> float:
    """Triage score in [0, 1] for the human review queue.

    Normalized cross-correlation between the RGB luminance gradient
    magnitude and the DEM gradient magnitude, mapped from [-1, 1] to
    [0, 1]. Zero-variance gradient fields (e.g. constant RGB) yield 0.5
    and a :class:`DegenerateDataWarning`. Scores only rank the queue;
    rejection stays with the human reviewer.
    """
    if not rgb.same_grid_spec(dem):
        raise ValueError("rgb and dem must share the same grid spec")
    lum = rgb.data.astype(np.float64) @ _LUM
    ga = _gradient_magnitude(lum)
    gb = _gradient_magnitude(dem.band(0))
    ga = ga - ga.mean()
    gb = gb - gb.mean()
    sa = ga.std()
    sb = gb.std()
    if sa == 0.0 or sb == 0.0:
        warnings.warn(
            "zero-variance gradient field; alignment score degenerate",
            DegenerateDataWarning,
            stacklevel=2,
        )
        return 0.5
    ncc = float((ga * gb).mean() / (sa * sb))
    return (max(-1.0, min(1.0, ncc)) + 1.0) / 2.0


def align_pair(rgb: GeoGrid, dem: GeoGrid, window: int = DEFAULT_OUTLIER_WINDOW,
               z_threshold: float = DEFAULT_OUTLIER_Z) -> AlignedPair:
    """Full per-pair pipeline: repair the DEM, resample onto the RGB grid, score."""
    repaired = repair_voids(dem, detect_outliers(dem, window, z_threshold))
    if not repaired.same_grid_spec(rgb):
        repaired = resample_to_grid(repaired, GridSpec.of(rgb))
        holes = repaired.band(0) == (repaired.nodata if repaired.nodata is not None else DEFAULT_NODATA)
        repaired = repair_voids(repaired, OutlierMask(holes))
    score = alignment_score(rgb, repaired)
    return AlignedPair(rgb, repaired, score)
