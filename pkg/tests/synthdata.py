"""Synthetic fixtures: fractal DEMs, rendered RGB tiles, and a minimal
TIFF writer independent of the package's reader."""

from __future__ import annotations

import struct
import zlib

import numpy as np

from terrabench.raster import CrsId, GeoGrid, GeoTransform
from terrabench.terrain import hillshade


def fractal_dem(
    size: int,
    seed: int,
    relief: float = 600.0,
    base: float = 100.0,
    pixel: float = 30.0,
    origin=(2650000.0, 1250000.0),
    crs: CrsId | None = None,
) -> GeoGrid:
    """Power-law spectral surface scaled to [base, base + relief]."""
    rng = np.random.default_rng(seed)
    freq = np.fft.fftfreq(size)
    fx, fy = np.meshgrid(freq, freq)
    f = np.hypot(fx, fy)
    f[0, 0] = 1.0
    spec = (f ** -1.3) * np.exp(2j * np.pi * rng.random((size, size)))
    z = np.real(np.fft.ifft2(spec))
    z = (z - z.min()) / (z.max() - z.min())
    data = (base + relief * z).astype(np.float32)
    gt = GeoTransform(origin[0], origin[1], pixel, -pixel)
    return GeoGrid(data, gt, crs or CrsId.lv95(), None)


def rgb_from_dem(dem: GeoGrid, seed: int = 0) -> GeoGrid:
    """RGB render whose luminance tracks elevation (hillshade-tinted)."""
    z = dem.band(0).astype(np.float64)
    lo, hi = z.min(), z.max()
    elev = (z - lo) / (hi - lo) if hi > lo else np.zeros_like(z)
    shade = hillshade(dem)
    lum = 0.75 * elev + 0.25 * shade
    rng = np.random.default_rng(seed)
    tint = 0.9 + 0.1 * rng.random(3)
    rgb = np.stack([np.clip(lum * 255.0 * t, 0, 255) for t in tint], axis=-1)
    return GeoGrid(rgb.astype(np.uint8), dem.geotransform, dem.crs, None)


def constant_dem(size: int, value: float, pixel: float = 30.0, crs=None) -> GeoGrid:
    data = np.full((size, size), value, dtype=np.float32)
    gt = GeoTransform(2650000.0, 1250000.0, pixel, -pixel)
    return GeoGrid(data, gt, crs or CrsId.lv95(), None)


def ramp_dem(size: int, start: float, stop: float, axis: int = 1, pixel: float = 30.0) -> GeoGrid:
    line = np.linspace(start, stop, size, dtype=np.float32)
    data = np.tile(line, (size, 1)) if axis == 1 else np.tile(line[:, None], (1, size))
    gt = GeoTransform(2650000.0, 1250000.0, pixel, -pixel)
    return GeoGrid(data, gt, CrsId.lv95(), None)


# ---------------------------------------------------------------------------
# Minimal TIFF writer (independent of terrabench.geotiff)
# ---------------------------------------------------------------------------

def write_tiff(
    path,
    array: np.ndarray,
    pixel_scale=(30.0, 30.0),
    origin=(2650000.0, 1250000.0),
    epsg: int = 2056,
    compression: int = 1,
    nodata: float | None = None,
    rows_per_strip: int | None = None,
    truncate_rows: int = 0,
    geographic: bool = False,
):
    """Write a striped little-endian TIFF with GeoTIFF georeferencing.

    ``compression`` is the raw TIFF tag value (1 none, 8 deflate, 5 LZW --
    LZW data is written unencoded since readers must refuse it by tag).
    ``truncate_rows`` drops payload rows to simulate corrupt files.
    """
    if array.ndim == 2:
        array = array[:, :, None]
    h, w, spp = array.shape
    if array.dtype == np.float32:
        sample_format, bits = 3, [32]
    elif array.dtype == np.uint8:
        sample_format, bits = 1, [8] * spp
    else:
        raise ValueError("float32 or uint8 only")

    payload_rows = h - truncate_rows
    rps = rows_per_strip or payload_rows or 1
    strips = []
    row = 0
    while row < payload_rows:
        chunk = array[row:min(row + rps, payload_rows)].tobytes()
        if compression == 8:
            chunk = zlib.compress(chunk)
        strips.append(chunk)
        row += rps
    if not strips:
        strips = [b""]

    entries = []  # (tag, type, count, packed_value_or_None, data_bytes_or_None)

    def short(tag, *values):
        entries.append((tag, 3, len(values), struct.pack("<" + "H" * len(values), *values)))

    def long_(tag, *values):
        entries.append((tag, 4, len(values), struct.pack("<" + "I" * len(values), *values)))

    def double(tag, *values):
        entries.append((tag, 12, len(values), struct.pack("<" + "d" * len(values), *values)))

    def ascii_(tag, text):
        entries.append((tag, 2, len(text) + 1, text.encode("ascii") + b"\0"))

    short(256, w)
    short(257, h)
    short(258, *bits)
    short(259, compression)
    short(262, 2 if spp == 3 else 1)
    long_(273, *([0] * len(strips)))  # offsets patched later
    short(277, spp)
    short(278, rps)
    long_(279, *(len(s) for s in strips))
    short(284, 1)
    short(339, sample_format)
    double(33550, pixel_scale[0], pixel_scale[1], 0.0)
    double(33922, 0.0, 0.0, 0.0, origin[0], origin[1], 0.0)
    if geographic:
        geokeys = [1, 1, 0, 2, 1024, 0, 1, 2, 2048, 0, 1, epsg]
    else:
        geokeys = [1, 1, 0, 2, 1024, 0, 1, 1, 3072, 0, 1, epsg]
    short(34735, *geokeys)
    if nodata is not None:
        ascii_(42113, repr(float(nodata)))

    entries.sort(key=lambda e: e[0])
    header = struct.pack("<2sHI", b"II", 42, 8)
    ifd_size = 2 + 12 * len(entries) + 4
    data_offset = 8 + ifd_size

    # lay out out-of-line entry data, then strips
    blobs = []
    offsets = {}
    pos = data_offset
    for i, (tag, typ, count, data) in enumerate(entries):
        if len(data) > 4:
            offsets[i] = pos
            blobs.append(data)
            pos += len(data)
            if pos % 2:  # word alignment
                blobs.append(b"\0")
                pos += 1
    strip_offsets = []
    for s in strips:
        strip_offsets.append(pos)
        blobs.append(s)
        pos += len(s)

    # patch the strip-offset entry now that positions are known
    for i, (tag, typ, count, data) in enumerate(entries):
        if tag == 273:
            entries[i] = (tag, 4, len(strip_offsets),
                          struct.pack("<" + "I" * len(strip_offsets), *strip_offsets))
            if len(entries[i][3]) > 4:
                # offsets array itself must be out-of-line: append at the end
                offsets[i] = pos
                blobs.append(entries[i][3])
                pos += len(entries[i][3])

    out = bytearray(header)
    out += struct.pack("<H", len(entries))
    for i, (tag, typ, count, data) in enumerate(entries):
        if len(data) > 4:
            value = struct.pack("<I", offsets[i])
        else:
            value = data.ljust(4, b"\0")
        out += struct.pack("<HHI", tag, typ, count) + value
    out += struct.pack("<I", 0)  # no next IFD
    for blob in blobs:
        out += blob
    with open(path, "wb") as f:
        f.write(bytes(out))
