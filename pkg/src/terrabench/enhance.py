"""Three-stage RGB enhancement: per-channel normalization, percentile
clipping, and the linear remap to 8-bit.

Channels are processed independently (no cross-channel coupling). The
stage order is fixed as normalize -> clip -> remap. Percentiles use
linear interpolation between order statistics; rounding to 8-bit is
half-away-from-zero. A constant channel produces an all-zero channel and
a :class:`DegenerateDataWarning` instead of aborting, so curation runs
survive blank tiles.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BandMismatch, DegenerateDataWarning
from .raster import GeoGrid


@dataclass(frozen=True)
class StretchConfig:
    """Percentile band for the clipping stage (defaults 1%/99%)."""

    p_low: float = 1.0
    p_high: float = 99.0

    def __post_init__(self):
        if not 0.0 <= self.p_low < self.p_high <= 100.0:
            raise ValueError(f"need 0 <= p_low < p_high <= 100, got ({self.p_low}, {self.p_high})")


def percentile_clip(channel: np.ndarray, cfg: StretchConfig) -> tuple[np.ndarray, float, float]:
    """Clamp a channel to its [p_low, p_high] percentile band.

    Returns (clipped, i_min, i_max); values already inside the band pass
    through unchanged.
    """
    flat = np.asarray(channel, dtype=np.float64)
    if flat.size == 0:
        raise ValueError("channel must be non-empty")
    i_min = float(np.percentile(flat, cfg.p_low))
    i_max = float(np.percentile(flat, cfg.p_high))
    return np.clip(flat, i_min, i_max), i_min, i_max


def linear_stretch(channel: np.ndarray, i_min: float, i_max: float) -> np.ndarray:
    """Remap [i_min, i_max] linearly onto 0..255 and round to uint8.

    A degenerate band (i_min == i_max) maps everything to 0 with a warning.
    """
    if i_min > i_max:
        raise ValueError(f"i_min {i_min} exceeds i_max {i_max}")
    values = np.asarray(channel, dtype=np.float64)
    if i_min == i_max:
        warnings.warn(
            "degenerate stretch band (i_min == i_max); channel mapped to 0",
            DegenerateDataWarning,
            stacklevel=2,
        )
        return np.zeros(values.shape, dtype=np.uint8)
    scaled = (values - i_min) / (i_max - i_min) * 255.0
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return np.clip(rounded, 0, 255).astype(np.uint8)


def _normalize_0_255(channel: np.ndarray) -> np.ndarray:
    lo = float(channel.min())
    hi = float(channel.max())
    if hi == lo:
        return np.full(channel.shape, np.nan)  # sentinel: constant channel
    return (channel.astype(np.float64) - lo) / (hi - lo) * 255.0


def enhance_rgb(rgb: GeoGrid, cfg: StretchConfig = StretchConfig()) -> GeoGrid:
    """Apply the full normalize/clip/remap chain to each RGB channel."""
    if rgb.bands != 3:
        raise BandMismatch(f"enhancement expects a 3-band RGB grid, got {rgb.bands} band(s)")
    out = np.empty((rgb.height, rgb.width, 3), dtype=np.uint8)
    for b in range(3):
        normalized = _normalize_0_255(rgb.band(b))
        if np.isnan(normalized).all():
            warnings.warn(
                f"channel {b} is constant; output zeroed",
                DegenerateDataWarning,
                stacklevel=2,
            )
            out[:, :, b] = 0
            continue
        clipped, i_min, i_max = percentile_clip(normalized, cfg)
        out[:, :, b] = linear_stretch(clipped, i_min, i_max)
    return GeoGrid(out, rgb.geotransform, rgb.crs, rgb.nodata)
