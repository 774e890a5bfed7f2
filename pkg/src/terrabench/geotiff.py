"""Minimal GeoTIFF import for the supported acquisition subset.

Reads classic TIFF only: striped, chunky planar layout, uncompressed or
Deflate, single-band float32 or 3-band uint8, georeferenced through
ModelPixelScale + ModelTiepoint with GeoKey CRS 4326, 2056 or 326xx.
Anything else raises :class:`UnsupportedFormat`. Import only; the native
``.rst`` format is used for everything the toolkit writes.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import CorruptHeader, DimensionMismatch, IoFailure, UnsupportedFormat
from .raster import CrsId, GeoGrid, GeoTransform

_TAG_WIDTH = 256
_TAG_HEIGHT = 257
_TAG_BITS = 258
_TAG_COMPRESSION = 259
_TAG_STRIP_OFFSETS = 273
_TAG_SPP = 277
_TAG_ROWS_PER_STRIP = 278
_TAG_STRIP_COUNTS = 279
_TAG_PLANAR = 284
_TAG_PREDICTOR = 317
_TAG_TILE_WIDTH = 322
_TAG_SAMPLE_FORMAT = 339
_TAG_PIXEL_SCALE = 33550
_TAG_TIEPOINT = 33922
_TAG_GEOKEYS = 34735
_TAG_GDAL_NODATA = 42113

_TYPE_SIZES = {1: 1, 2: 1, 3: 2, 4: 4, 5: 8, 6: 1, 7: 1, 8: 2, 9: 4, 10: 8, 11: 4, 12: 8}
_TYPE_FMT = {1: "B", 3: "H", 4: "I", 8: "h", 9: "i", 11: "f", 12: "d"}

_COMPRESSION_NONE = 1
_COMPRESSION_DEFLATE = (8, 32946)

_GEOKEY_MODEL_TYPE = 1024
_GEOKEY_GEOGRAPHIC = 2048
_GEOKEY_PROJECTED = 3072


def _read_entries(buf: bytes, order: str):
    if len(buf) < 8:
        raise CorruptHeader("file shorter than TIFF header")
    ifd_off = struct.unpack(order + "I", buf[4:8])[0]
    if ifd_off + 2 > len(buf):
        raise CorruptHeader("IFD offset beyond end of file")
    n = struct.unpack(order + "H", buf[ifd_off:ifd_off + 2])[0]
    entries = {}
    pos = ifd_off + 2
    for _ in range(n):
        if pos + 12 > len(buf):
            raise CorruptHeader("truncated IFD")
        tag, typ, count = struct.unpack(order + "HHI", buf[pos:pos + 8])
        entries[tag] = (typ, count, buf[pos + 8:pos + 12])
        pos += 12
    return entries


def _values(buf: bytes, order: str, entry):
    typ, count, inline = entry
    if typ == 2:  # ASCII
        size = count
        data = inline[:size] if size <= 4 else _at(buf, struct.unpack(order + "I", inline)[0], size)
        return data.split(b"\0")[0].decode("ascii", "replace")
    if typ not in _TYPE_FMT:
        raise UnsupportedFormat(f"TIFF field type {typ} not supported")
    size = _TYPE_SIZES[typ] * count
    raw = inline[:size] if size <= 4 else _at(buf, struct.unpack(order + "I", inline)[0], size)
    return list(struct.unpack(order + _TYPE_FMT[typ] * count, raw))


def _at(buf: bytes, offset: int, size: int) -> bytes:
    if offset + size > len(buf):
        raise CorruptHeader("field data beyond end of file")
    return buf[offset:offset + size]


def _crs_from_geokeys(keys: list[int]) -> CrsId:
    if len(keys) < 4 or len(keys) % 4 != 0:
        raise CorruptHeader("malformed GeoKey directory")
    kv = {}
    for i in range(4, len(keys), 4):
        key_id, location, count, value = keys[i:i + 4]
        if location == 0 and count == 1:
            kv[key_id] = value
    code = kv.get(_GEOKEY_PROJECTED)
    if code is not None:
        if code == 2056:
            return CrsId.lv95()
        if 32601 <= code <= 32660:
            return CrsId.utm(code - 32600, "N")
        raise UnsupportedFormat(f"projected CRS code {code} outside supported subset")
    code = kv.get(_GEOKEY_GEOGRAPHIC)
    if code == 4326:
        return CrsId.wgs84()
    raise UnsupportedFormat(f"geographic CRS code {code} outside supported subset")


def load_geotiff_subset(path) -> GeoGrid:
    """Parse a GeoTIFF within the supported subset into a :class:`GeoGrid`."""
    try:
        with open(path, "rb") as f:
            buf = f.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if buf[:2] == b"II":
        order = "<"
    elif buf[:2] == b"MM":
        order = ">"
    else:
        raise CorruptHeader(f"{path}: not a TIFF file")
    magic = struct.unpack(order + "H", buf[2:4])[0]
    if magic == 43:
        raise UnsupportedFormat("BigTIFF is outside the supported subset")
    if magic != 42:
        raise CorruptHeader(f"{path}: bad TIFF magic {magic}")

    entries = _read_entries(buf, order)

    def tag(t, default=None):
        if t not in entries:
            return default
        return _values(buf, order, entries[t])

    if _TAG_TILE_WIDTH in entries:
        raise UnsupportedFormat("tiled TIFF not supported; striped only")

    width = int(tag(_TAG_WIDTH, [0])[0])
    height = int(tag(_TAG_HEIGHT, [0])[0])
    if width <= 0 or height <= 0:
        raise CorruptHeader(f"{path}: missing or invalid dimensions")

    compression = int(tag(_TAG_COMPRESSION, [1])[0])
    if compression != _COMPRESSION_NONE and compression not in _COMPRESSION_DEFLATE:
        raise UnsupportedFormat(f"compression {compression} outside subset (none/deflate only)")
    predictor = int(tag(_TAG_PREDICTOR, [1])[0])
    if predictor != 1:
        raise UnsupportedFormat(f"predictor {predictor} not supported")
    planar = int(tag(_TAG_PLANAR, [1])[0])
    if planar != 1:
        raise UnsupportedFormat("planar configuration 2 not supported")

    spp = int(tag(_TAG_SPP, [1])[0])
    bits = tag(_TAG_BITS, [8] * spp)
    sample_format = int(tag(_TAG_SAMPLE_FORMAT, [1])[0])
    if spp == 1 and sample_format == 3 and bits == [32]:
        dtype = np.float32
    elif spp == 3 and sample_format == 1 and bits == [8, 8, 8]:
        dtype = np.uint8
    else:
        raise UnsupportedFormat(
            f"sample layout (spp={spp}, bits={bits}, format={sample_format}) outside subset"
        )

    offsets = tag(_TAG_STRIP_OFFSETS)
    counts = tag(_TAG_STRIP_COUNTS)
    if not offsets or not counts or len(offsets) != len(counts):
        raise CorruptHeader(f"{path}: missing strip layout")
    chunks = []
    for off, cnt in zip(offsets, counts):
        raw = _at(buf, int(off), int(cnt))
        if compression in _COMPRESSION_DEFLATE:
            try:
                raw = zlib.decompress(raw)
            except zlib.error as exc:
                raise CorruptHeader(f"{path}: bad deflate strip ({exc})") from exc
        chunks.append(raw)
    payload = b"".join(chunks)
    expected = width * height * spp * np.dtype(dtype).itemsize
    if len(payload) != expected:
        raise DimensionMismatch(
            f"{path}: decoded {len(payload)} bytes, header implies {expected}"
        )
    data = np.frombuffer(payload, dtype=np.dtype(dtype).newbyteorder(order))
    data = data.astype(dtype, copy=True).reshape(height, width, spp)

    scale = tag(_TAG_PIXEL_SCALE)
    tie = tag(_TAG_TIEPOINT)
    if not scale or not tie or len(tie) < 6:
        raise UnsupportedFormat("missing ModelPixelScale/ModelTiepoint georeferencing")
    sx, sy = float(scale[0]), float(scale[1])
    i, j, _, x, y, _ = (float(v) for v in tie[:6])
    gt = GeoTransform(x - i * sx, y + j * sy, sx, -sy)

    geokeys = tag(_TAG_GEOKEYS)
    if not geokeys:
        raise UnsupportedFormat("missing GeoKey directory")
    crs = _crs_from_geokeys([int(v) for v in geokeys])

    nodata = None
    nd = tag(_TAG_GDAL_NODATA)
    if nd is not None:
        try:
            nodata = float(nd.strip())
        except ValueError:
            nodata = None

    return GeoGrid(data, gt, crs, nodata)
