"""PNG preview rendering for the review queue."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from .raster import GeoGrid
from .terrain import hillshade

PREVIEW_KINDS = ("rgb", "dem-hillshade", "dem-colormap")


def _png_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    return buf.getvalue()


def render_rgb(grid: GeoGrid) -> bytes:
    """PNG of the stored RGB tile, unmodified."""
    return _png_bytes(grid.data)


def render_hillshade(grid: GeoGrid, azimuth: float = 315.0, altitude: float = 45.0) -> bytes:
    """Grayscale Lambertian shading of a DEM (cartographic 315/45 defaults)."""
    shade = hillshade(grid, azimuth, altitude)
    return _png_bytes(np.round(shade * 255.0).astype(np.uint8))


def render_colormap(grid: GeoGrid) -> bytes:
    """Linear grayscale over the tile's elevation min/max."""
    z = grid.band(0).astype(np.float64)
    lo, hi = float(z.min()), float(z.max())
    if hi == lo:
        scaled = np.zeros_like(z)
    else:
        scaled = (z - lo) / (hi - lo) * 255.0
    return _png_bytes(np.round(scaled).astype(np.uint8))


def render_preview(kind: str, grid: GeoGrid) -> bytes:
    if kind == "rgb":
        return render_rgb(grid)
    if kind == "dem-hillshade":
        return render_hillshade(grid)
    if kind == "dem-colormap":
        return render_colormap(grid)
    raise ValueError(f"unknown preview kind {kind!r}; expected one of {PREVIEW_KINDS}")
