"""Slope and relief analysis, six-class tile classification, and dataset
statistics.

The class taxonomy is Ocean, Plain, Hill, LowUndulatingMountains,
HighUndulatingMountains, Highland, decided per tile by an ordered rule
list over elevation and relief. The numeric thresholds live in one
config block so they can be recalibrated without code changes; the text
annotation can only override toward Ocean (elevation beats text
everywhere else).
"""

from __future__ import annotations

import enum
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, EmptyCatalog
from .raster import GeoGrid

ELEVATION_BIN_METERS = 50.0
ELEVATION_RANGE = (-200.0, 5000.0)


class TerrainClass(enum.Enum):
    OCEAN = "Ocean"
    PLAIN = "Plain"
    HILL = "Hill"
    LOW_UNDULATING_MOUNTAINS = "LowUndulatingMountains"
    HIGH_UNDULATING_MOUNTAINS = "HighUndulatingMountains"
    HIGHLAND = "Highland"

    @classmethod
    def from_string(cls, s: str) -> "TerrainClass":
        for member in cls:
            if member.value == s:
                return member
        raise ValueError(f"unknown terrain class {s!r}")


@dataclass(frozen=True)
class TerrainThresholds:
    """Decision-list thresholds, grouped for calibration in one place."""

    ocean_fraction: float = 0.9       # share of pixels at/below sea level
    sea_level: float = 0.0            # meters
    high_relief: float = 500.0        # meters, rule 2
    low_relief: float = 200.0         # meters, rule 3
    highland_mean: float = 1000.0     # meters, rule 4
    hill_relief: float = 30.0         # meters, rule 5


DEFAULT_THRESHOLDS = TerrainThresholds()


def _east_north_gradients(dem: GeoGrid):
    """Horn 3x3 gradients on the interior, one-sided differences on borders.

    Returns (dz/d_east, dz/d_north) in meters per meter.
    """
    gt = dem.geotransform
    dx = abs(gt.pixel_dx)
    dy = abs(gt.pixel_dy)
    if dx == 0 or dy == 0:
        raise DegenerateInput("pixel size must be nonzero")
    z = dem.band(0).astype(np.float64)
    h, w = z.shape
    # one-sided / central differences everywhere first
    gr, gc = np.gradient(z, dy, dx)
    if h >= 3 and w >= 3:
        # Horn weighting for interior pixels
        gc[1:-1, 1:-1] = (
            (z[:-2, 2:] + 2.0 * z[1:-1, 2:] + z[2:, 2:])
            - (z[:-2, :-2] + 2.0 * z[1:-1, :-2] + z[2:, :-2])
        ) / (8.0 * dx)
        gr[1:-1, 1:-1] = (
            (z[2:, :-2] + 2.0 * z[2:, 1:-1] + z[2:, 2:])
            - (z[:-2, :-2] + 2.0 * z[:-2, 1:-1] + z[:-2, 2:])
        ) / (8.0 * dy)
    east = gc * math.copysign(1.0, gt.pixel_dx)
    north = gr * math.copysign(1.0, gt.pixel_dy)
    return east, north


def slope_map(dem: GeoGrid) -> np.ndarray:
    """Slope in degrees from Horn gradients (pixel size taken as meters)."""
    east, north = _east_north_gradients(dem)
    return np.degrees(np.arctan(np.hypot(east, north)))


def hillshade(dem: GeoGrid, azimuth: float = 315.0, altitude: float = 45.0) -> np.ndarray:
    """Lambertian shading in [0, 1]; azimuth clockwise from north, degrees."""
    east, north = _east_north_gradients(dem)
    az = math.radians(azimuth)
    alt = math.radians(altitude)
    denom = np.sqrt(1.0 + east * east + north * north)
    shade = (
        math.sin(alt)
        - math.cos(alt) * (math.sin(az) * east + math.cos(az) * north)
    ) / denom
    return np.clip(shade, 0.0, 1.0)


def classify_terrain(
    dem: GeoGrid,
    annotation: str | None = None,
    thresholds: TerrainThresholds = DEFAULT_THRESHOLDS,
) -> TerrainClass:
    """Classify a repaired tile with the ordered decision list (first match wins):

    1. Ocean when >= 90% of pixels sit at/below sea level, or the
       annotation mentions oceans;
    2. HighUndulatingMountains when relief exceeds 500 m;
    3. LowUndulatingMountains when relief is in (200, 500];
    4. Highland when mean elevation >= 1000 m;
    5. Hill when relief is in (30, 200];
    6. Plain otherwise.
    """
    z = dem.band(0).astype(np.float64)
    if annotation:
        from .catalog import validate_annotation

        if "oceans" in validate_annotation(annotation).matched_terms:
            return TerrainClass.OCEAN
    if (z <= thresholds.sea_level).mean() >= thresholds.ocean_fraction:
        return TerrainClass.OCEAN
    relief = float(z.max() - z.min())
    if relief > thresholds.high_relief:
        return TerrainClass.HIGH_UNDULATING_MOUNTAINS
    if relief > thresholds.low_relief:
        return TerrainClass.LOW_UNDULATING_MOUNTAINS
    if float(z.mean()) >= thresholds.highland_mean:
        return TerrainClass.HIGHLAND
    if relief > thresholds.hill_relief:
        return TerrainClass.HILL
    return TerrainClass.PLAIN


@dataclass
class TerrainStats:
    """Aggregate catalog statistics (proportions, elevation histograms,
    cube-root pixel counts per resolution tier)."""

    class_proportions: dict[str, float]
    elevation_histogram_by_class: dict[str, list[int]]
    depth_count_cube_root: dict[tuple[float, str], float]
    bin_edges: list[float] = field(default_factory=list)
    total_samples: int = 0


def elevation_bin_edges() -> np.ndarray:
    lo, hi = ELEVATION_RANGE
    return np.arange(lo, hi + ELEVATION_BIN_METERS, ELEVATION_BIN_METERS)


def dataset_stats(samples) -> TerrainStats:
    """Compute catalog statistics from (terrain, resolution_tier, dem) triples.

    ``samples`` is an iterable of objects exposing ``terrain`` (class name
    string), ``resolution_tier`` and a ``dem`` GeoGrid (or a loader
    callable). Merges are associative/commutative, so the result is
    independent of catalog order.
    """
    edges = elevation_bin_edges()
    class_counts: Counter[str] = Counter()
    hist: dict[str, np.ndarray] = defaultdict(lambda: np.zeros(len(edges) - 1, dtype=np.int64))
    pixels: Counter[tuple[float, str]] = Counter()
    n = 0
    for sample in samples:
        n += 1
        cls = sample.terrain
        class_counts[cls] += 1
        dem = sample.dem() if callable(sample.dem) else sample.dem
        z = dem.band(0).astype(np.float64)
        counts, _ = np.histogram(z, bins=edges)
        hist[cls] += counts
        pixels[(float(sample.resolution_tier), cls)] += z.size
    if n == 0:
        raise EmptyCatalog("dataset statistics need at least one classified sample")
    proportions = {cls: count / n for cls, count in sorted(class_counts.items())}
    cube_roots = {key: float(np.cbrt(v)) for key, v in sorted(pixels.items())}
    return TerrainStats(
        class_proportions=proportions,
        elevation_histogram_by_class={cls: h.tolist() for cls, h in sorted(hist.items())},
        depth_count_cube_root=cube_roots,
        bin_edges=edges.tolist(),
        total_samples=n,
    )
