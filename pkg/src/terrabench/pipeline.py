"""Per-tile pipeline stages behind the CLI subcommands.

Each stage maps over disjoint tiles with a configurable worker pool and
rewrites the manifest copy-on-write, so reruns over unchanged inputs are
idempotent and parallel order never leaks into the outputs.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import align as align_mod
from .catalog import SampleRecord, infer_resolution_tier
from .config import PipelineConfig
from .enhance import enhance_rgb
from .raster import CANONICAL_SIZE, GeoGrid, load_tile, meters_per_pixel, resize_canonical, save_tile
from .terrain import classify_terrain


def _map_tiles(fn, records, jobs):
    workers = jobs or os.cpu_count() or 1
    if workers <= 1:
        return [fn(rec) for rec in records]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, records))


def run_align(records, out_dir, cfg: PipelineConfig) -> list[SampleRecord]:
    """Register DEMs onto RGB grids, repair outliers, resize to canonical size.

    Writes ``<id>_rgb.rst`` / ``<id>_dem.rst`` into ``out_dir`` and returns
    records pointing at the aligned tiles, with alignment scores and
    resolution tiers filled in.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(rec: SampleRecord) -> SampleRecord:
        rgb = load_tile(rec.rgb_path)
        dem = load_tile(rec.dem_path)
        tier = infer_resolution_tier(meters_per_pixel(dem))
        pair = align_mod.align_pair(rgb, dem, cfg.outlier_window, cfg.outlier_z)
        rgb_c = resize_canonical(pair.rgb, CANONICAL_SIZE)
        dem_c = resize_canonical(pair.dem, CANONICAL_SIZE)
        rgb_path = out_dir / f"{rec.id}_rgb.rst"
        dem_path = out_dir / f"{rec.id}_dem.rst"
        save_tile(rgb_c, rgb_path)
        save_tile(dem_c, dem_path)
        return replace(
            rec,
            rgb_path=str(rgb_path),
            dem_path=str(dem_path),
            alignment_score=pair.alignment_score,
            resolution_tier=tier,
        )

    return _map_tiles(one, records, cfg.jobs)


def run_enhance(records, cfg: PipelineConfig) -> list[SampleRecord]:
    """Apply the three-stage stretch to every RGB tile in place (same paths)."""

    def one(rec: SampleRecord) -> SampleRecord:
        rgb = load_tile(rec.rgb_path)
        save_tile(enhance_rgb(rgb, cfg.stretch), rec.rgb_path)
        return rec

    return _map_tiles(one, records, cfg.jobs)


def run_classify(records, cfg: PipelineConfig) -> list[SampleRecord]:
    """Fill the terrain class of every record from its repaired DEM."""

    def one(rec: SampleRecord) -> SampleRecord:
        dem = load_tile(rec.dem_path)
        cls = classify_terrain(dem, rec.annotation or None, cfg.terrain)
        return replace(rec, terrain=cls.value)

    return _map_tiles(one, records, cfg.jobs)


class StatsSample:
    """Adapter giving dataset_stats lazy access to a record's DEM."""

    __slots__ = ("terrain", "resolution_tier", "_path")

    def __init__(self, rec: SampleRecord):
        self.terrain = rec.terrain or "unclassified"
        self.resolution_tier = rec.resolution_tier if rec.resolution_tier is not None else 0.0
        self._path = rec.dem_path

    def dem(self) -> GeoGrid:
        return load_tile(self._path)
