"""Georeferenced raster grids and tile file I/O.

A grid couples a (height, width, bands) sample array with an affine
geotransform and a CRS id. DEM tiles are single-band float32, RGB tiles
are 3-band uint8. The native on-disk format (extension ``.rst``) is a
one-line UTF-8 JSON header followed by the raw little-endian samples,
which makes round-trips bit-exact. GeoTIFF import is handled separately
in :mod:`terrabench.geotiff`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (
    CorruptHeader,
    DegenerateInput,
    DimensionMismatch,
    IoFailure,
    UnsupportedFormat,
)

CANONICAL_SIZE = 512

_DTYPES = {"float32": np.float32, "uint8": np.uint8}


class GeoTransform(NamedTuple):
    """Affine pixel->CRS mapping: x = origin_x + col*pixel_dx, y = origin_y + row*pixel_dy."""

    origin_x: float
    origin_y: float
    pixel_dx: float
    pixel_dy: float


@dataclass(frozen=True)
class CrsId:
    """Coordinate reference system id: WGS84, LV95, or a UTM zone."""

    kind: str  # "WGS84" | "LV95" | "UTM"
    zone: int | None = None
    hemisphere: str | None = None  # "N" | "S", UTM only

    def __post_init__(self):
        if self.kind not in ("WGS84", "LV95", "UTM"):
            raise ValueError(f"unknown CRS kind: {self.kind}")
        if self.kind == "UTM":
            if self.zone is None or not 1 <= self.zone <= 60:
                raise ValueError("UTM zone must be in 1..60")
            if self.hemisphere not in ("N", "S"):
                raise ValueError("UTM hemisphere must be 'N' or 'S'")
        elif self.zone is not None or self.hemisphere is not None:
            raise ValueError(f"{self.kind} takes no zone/hemisphere")

    @classmethod
    def wgs84(cls) -> "CrsId":
        return cls("WGS84")

    @classmethod
    def lv95(cls) -> "CrsId":
        return cls("LV95")

    @classmethod
    def utm(cls, zone: int, hemisphere: str = "N") -> "CrsId":
        return cls("UTM", zone, hemisphere)

    def to_string(self) -> str:
        if self.kind == "UTM":
            return f"UTM/{self.zone}{self.hemisphere}"
        return self.kind

    @classmethod
    def from_string(cls, s: str) -> "CrsId":
        if s in ("WGS84", "LV95"):
            return cls(s)
        if s.startswith("UTM/"):
            body = s[4:]
            if body and body[-1] in "NS" and body[:-1].isdigit():
                return cls.utm(int(body[:-1]), body[-1])
        raise ValueError(f"cannot parse CRS id: {s!r}")


@dataclass(frozen=True)
class GeoGrid:
    """Immutable georeferenced raster.

    ``data`` has shape (height, width, bands); flattened in C order it is
    the row-major band-interleaved sample stream stored on disk.
    """

    data: np.ndarray
    geotransform: GeoTransform
    crs: CrsId
    nodata: float | None = None

    def __post_init__(self):
        d = self.data
        if d.ndim == 2:
            d = d[:, :, np.newaxis]
            object.__setattr__(self, "data", np.ascontiguousarray(d))
        elif d.ndim == 3:
            object.__setattr__(self, "data", np.ascontiguousarray(d))
        else:
            raise ValueError("grid data must be 2-D or 3-D")
        h, w, b = self.data.shape
        if h <= 0 or w <= 0:
            raise ValueError("grid dimensions must be positive")
        if b not in (1, 3):
            raise ValueError("band count must be 1 or 3")
        if self.data.dtype == np.float32:
            if b != 1:
                raise ValueError("float32 grids must be single-band (DEM)")
        elif self.data.dtype == np.uint8:
            if b != 3:
                raise ValueError("uint8 grids must be 3-band (RGB)")
        else:
            raise ValueError(f"unsupported dtype {self.data.dtype}; use float32 or uint8")
        gt = GeoTransform(*self.geotransform)
        object.__setattr__(self, "geotransform", gt)
        if gt.pixel_dx == 0 or gt.pixel_dy == 0:
            raise ValueError("pixel sizes must be nonzero")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]

    @property
    def dtype_name(self) -> str:
        return str(self.data.dtype)

    def band(self, i: int = 0) -> np.ndarray:
        """2-D view of band i."""
        return self.data[:, :, i]

    def pixel_to_geo(self, row: float, col: float) -> tuple[float, float]:
        """Map a (fractional) pixel index to CRS coordinates."""
        gt = self.geotransform
        return gt.origin_x + col * gt.pixel_dx, gt.origin_y + row * gt.pixel_dy

    def geo_to_pixel(self, x: float, y: float) -> tuple[float, float]:
        """Inverse of :meth:`pixel_to_geo`; returns (row, col)."""
        gt = self.geotransform
        return (y - gt.origin_y) / gt.pixel_dy, (x - gt.origin_x) / gt.pixel_dx

    def same_grid_spec(self, other: "GeoGrid") -> bool:
        return (
            self.width == other.width
            and self.height == other.height
            and self.geotransform == other.geotransform
            and self.crs == other.crs
        )


def pixel_to_geo(grid: GeoGrid, row: float, col: float) -> tuple[float, float]:
    return grid.pixel_to_geo(row, col)


def geo_to_pixel(grid: GeoGrid, x: float, y: float) -> tuple[float, float]:
    return grid.geo_to_pixel(x, y)


# ---------------------------------------------------------------------------
# Native tile format: JSON header line + raw little-endian samples
# ---------------------------------------------------------------------------


def save_tile(grid: GeoGrid, path) -> None:
    """Write a grid to the native tile format (bit-exact round-trip)."""
    header = {
        "width": grid.width,
        "height": grid.height,
        "bands": grid.bands,
        "dtype": grid.dtype_name,
        "geotransform": list(grid.geotransform),
        "crs": grid.crs.to_string(),
        "nodata": grid.nodata,
    }
    payload = np.ascontiguousarray(grid.data, dtype=grid.data.dtype.newbyteorder("<"))
    try:
        with open(path, "wb") as f:
            f.write(json.dumps(header, sort_keys=True).encode("utf-8"))
            f.write(b"\n")
            f.write(payload.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write tile {path}: {exc}") from exc


def _load_internal(path) -> GeoGrid:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as exc:
        raise IoFailure(f"cannot read tile {path}: {exc}") from exc
    nl = raw.find(b"\n")
    if nl < 0:
        raise CorruptHeader(f"{path}: no header line")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
        width = int(header["width"])
        height = int(header["height"])
        bands = int(header["bands"])
        dtype = _DTYPES[header["dtype"]]
        gt = GeoTransform(*(float(v) for v in header["geotransform"]))
        crs = CrsId.from_string(header["crs"])
        nodata = header.get("nodata")
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
        raise CorruptHeader(f"{path}: bad header ({exc})") from exc
    expected = width * height * bands * np.dtype(dtype).itemsize
    body = raw[nl + 1:]
    if len(body) != expected:
        raise DimensionMismatch(
            f"{path}: header declares {expected} payload bytes, found {len(body)}"
        )
    data = np.frombuffer(body, dtype=np.dtype(dtype).newbyteorder("<"))
    data = data.astype(dtype, copy=True).reshape(height, width, bands)
    return GeoGrid(data, gt, crs, None if nodata is None else float(nodata))


def load_tile(path, format: str | None = None) -> GeoGrid:
    """Load a tile; ``format`` is "internal", "geotiff-subset", or None to infer
    from the extension (``.rst`` native, ``.tif``/``.tiff`` GeoTIFF import)."""
    if format is None:
        ext = Path(path).suffix.lower()
        format = "geotiff-subset" if ext in (".tif", ".tiff") else "internal"
    if format == "internal":
        return _load_internal(path)
    if format == "geotiff-subset":
        from .geotiff import load_geotiff_subset

        return load_geotiff_subset(path)
    raise UnsupportedFormat(f"unknown tile format {format!r}")


# ---------------------------------------------------------------------------
# Resampling to the canonical benchmark shape
# ---------------------------------------------------------------------------


def bilinear_sample(band: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Bilinear sample of a 2-D array at fractional (row, col) positions.

    Positions are clamped to the valid index range; exact integer positions
    return the node value exactly.
    """
    h, w = band.shape
    r = np.clip(rows, 0.0, h - 1.0)
    c = np.clip(cols, 0.0, w - 1.0)
    r0 = np.floor(r).astype(np.intp)
    c0 = np.floor(c).astype(np.intp)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = r - r0
    fc = c - c0
    v00 = band[r0, c0].astype(np.float64)
    v01 = band[r0, c1].astype(np.float64)
    v10 = band[r1, c0].astype(np.float64)
    v11 = band[r1, c1].astype(np.float64)
    top = v00 * (1.0 - fc) + v01 * fc
    bot = v10 * (1.0 - fc) + v11 * fc
    return top * (1.0 - fr) + bot * fr


def _round_half_away(values: np.ndarray) -> np.ndarray:
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def resize_canonical(grid: GeoGrid, size: int = CANONICAL_SIZE) -> GeoGrid:
    """Resize to the canonical square shape with bilinear sampling.

    Output pixel (r, c) samples the input at (r*h/size, c*w/size), so the
    geotransform origin is unchanged and pixel sizes scale by in_dim/size.
    uint8 grids are rounded half-away-from-zero after interpolation.
    """
    if grid.width < 2 or grid.height < 2:
        raise DegenerateInput("resize requires a grid of at least 2x2 pixels")
    if grid.width == size and grid.height == size:
        return grid
    sr = grid.height / size
    sc = grid.width / size
    rows = np.arange(size, dtype=np.float64) * sr
    cols = np.arange(size, dtype=np.float64) * sc
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    out = np.empty((size, size, grid.bands), dtype=grid.data.dtype)
    for b in range(grid.bands):
        vals = bilinear_sample(grid.band(b), rr, cc)
        if grid.data.dtype == np.uint8:
            vals = np.clip(_round_half_away(vals), 0, 255)
        out[:, :, b] = vals.astype(grid.data.dtype)
    gt = grid.geotransform
    new_gt = GeoTransform(gt.origin_x, gt.origin_y, gt.pixel_dx * sc, gt.pixel_dy * sr)
    return GeoGrid(out, new_gt, grid.crs, grid.nodata)


def meters_per_pixel(grid: GeoGrid) -> float:
    """Approximate ground pixel size in meters (|dx|; degrees converted at tile latitude)."""
    gt = grid.geotransform
    if grid.crs.kind == "WGS84":
        mid_lat = gt.origin_y + gt.pixel_dy * grid.height / 2.0
        return abs(gt.pixel_dx) * 111320.0 * math.cos(math.radians(mid_lat))
    return abs(gt.pixel_dx)
