"""Depth metrics (threshold accuracy, RMSE, MAE) and benchmark reports.

Protocol: ground truth is normalized per tile to [0, 255] by its valid
min/max, the prediction is aligned by least-squares scale-and-shift and
clamped, and both sides get a +1 offset so ratio metrics stay defined
(elevations at or below sea level would otherwise produce non-positive
"depths"). MAE and RMSE are unaffected by the common offset. Per-subset
numbers are unweighted means of per-sample metrics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateGroundTruth,
    EmptyMask,
    MissingPrediction,
    NonPositiveDepth,
)
from .raster import load_tile
from .terrain import TerrainClass

DELTA_BASE = 1.25
METRIC_COLUMNS = ("MAE", "RMSE", "delta", "delta2", "delta3")

# Terrain composition of the two headline subsets (plain vs mountain terrain).
D1_CLASSES = frozenset({TerrainClass.PLAIN.value})
D2_CLASSES = frozenset(
    {TerrainClass.LOW_UNDULATING_MOUNTAINS.value, TerrainClass.HIGH_UNDULATING_MOUNTAINS.value}
)


@dataclass(frozen=True)
class DepthPair:
    """Prediction/ground-truth grids plus the valid-pixel mask."""

    pred: np.ndarray
    gt: np.ndarray
    valid_mask: np.ndarray

    def __post_init__(self):
        if self.pred.shape != self.gt.shape or self.pred.shape != self.valid_mask.shape:
            raise ValueError("pred, gt and mask must share one shape")

    @property
    def m(self) -> int:
        return int(self.valid_mask.sum())


def normalize_for_eval(
    pred: np.ndarray,
    gt: np.ndarray,
    mask: np.ndarray | None = None,
    offset: float = 1.0,
) -> DepthPair:
    """Map ground truth to [0, 255], least-squares align the prediction.

    The prediction is fitted with scale-and-shift over valid pixels and
    clamped to [0, 255]; both sides then receive ``offset`` so that ratio
    metrics operate on strictly positive values.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if mask is None:
        mask = np.isfinite(gt) & np.isfinite(pred)
    mask = np.asarray(mask, dtype=bool)
    if mask.sum() < 2:
        raise DegenerateGroundTruth("need at least 2 valid pixels")
    g = gt[mask]
    lo, hi = float(g.min()), float(g.max())
    if hi == lo:
        raise DegenerateGroundTruth("ground truth constant over the valid mask")

    # least-squares scale-and-shift in raw space, then the identical
    # normalization map on both sides; an exactly affine prediction (in
    # particular pred == gt) therefore normalizes bit-exactly onto gt
    p = pred[mask]
    var = float(((p - p.mean()) ** 2).sum())
    if var == 0.0:
        scale, shift = 0.0, float(g.mean())
    else:
        scale = float(((p - p.mean()) * (g - g.mean())).sum()) / var
        shift = float(g.mean() - scale * p.mean())
    aligned = scale * pred + shift

    gt_n = (gt - lo) / (hi - lo) * 255.0
    pred_n = np.clip((aligned - lo) / (hi - lo) * 255.0, 0.0, 255.0)
    return DepthPair(pred_n + offset, gt_n + offset, mask)


def delta_accuracy(pair: DepthPair, k: int) -> float:
    """Percentage of valid pixels with max(d/a, a/d) strictly below 1.25^k."""
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    if pair.m == 0:
        raise EmptyMask("no valid pixels")
    d = pair.pred[pair.valid_mask]
    a = pair.gt[pair.valid_mask]
    if (d <= 0).any() or (a <= 0).any():
        raise NonPositiveDepth("ratio metrics require positive depths")
    ratio = np.maximum(d / a, a / d)
    return float(100.0 * (ratio < DELTA_BASE**k).mean())


def rmse(pair: DepthPair) -> float:
    if pair.m == 0:
        raise EmptyMask("no valid pixels")
    diff = pair.pred[pair.valid_mask] - pair.gt[pair.valid_mask]
    return float(np.sqrt((diff**2).mean()))


def mae(pair: DepthPair) -> float:
    if pair.m == 0:
        raise EmptyMask("no valid pixels")
    diff = pair.pred[pair.valid_mask] - pair.gt[pair.valid_mask]
    return float(np.abs(diff).mean())


def sample_metrics(pair: DepthPair) -> dict[str, float]:
    return {
        "MAE": mae(pair),
        "RMSE": rmse(pair),
        "delta": delta_accuracy(pair, 1),
        "delta2": delta_accuracy(pair, 2),
        "delta3": delta_accuracy(pair, 3),
    }


@dataclass
class MetricsReport:
    """Per-subset metric table for one evaluated model."""

    model: str
    rows: dict[str, dict[str, float]]           # subset -> column -> value
    sample_counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "columns": list(METRIC_COLUMNS),
            "rows": {k: self.rows[k] for k in sorted(self.rows)},
            "sample_counts": {k: self.sample_counts[k] for k in sorted(self.sample_counts)},
        }

    def to_text(self) -> str:
        """Aligned-column table, columns in benchmark order."""
        headers = ["subset"] + list(METRIC_COLUMNS) + ["n"]
        lines = [headers]
        for subset in sorted(self.rows):
            row = self.rows[subset]
            lines.append(
                [subset]
                + [f"{row[c]:.4f}" for c in METRIC_COLUMNS]
                + [str(self.sample_counts.get(subset, 0))]
            )
        widths = [max(len(line[i]) for line in lines) for i in range(len(headers))]
        out = []
        for line in lines:
            out.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
        return "\n".join(out)


def evaluate_pairs(samples, model: str = "model") -> MetricsReport:
    """Aggregate per-sample metrics into subset rows.

    ``samples`` is an iterable of (terrain_class_name, DepthPair). Subsets:
    ``all``, ``D1`` (plain), ``D2`` (mountains), and one row per terrain
    class present. Empty subsets are omitted.
    """
    per_subset: dict[str, list[dict[str, float]]] = {}

    def add(subset: str, metrics: dict[str, float]):
        per_subset.setdefault(subset, []).append(metrics)

    count = 0
    for terrain, pair in samples:
        metrics = sample_metrics(pair)
        count += 1
        add("all", metrics)
        if terrain in D1_CLASSES:
            add("D1", metrics)
        if terrain in D2_CLASSES:
            add("D2", metrics)
        if terrain:
            add(f"terrain:{terrain}", metrics)
    if count == 0:
        raise EmptyMask("no samples to evaluate")
    rows = {
        subset: {col: float(np.mean([m[col] for m in ms])) for col in METRIC_COLUMNS}
        for subset, ms in per_subset.items()
    }
    counts = {subset: len(ms) for subset, ms in per_subset.items()}
    return MetricsReport(model=model, rows=rows, sample_counts=counts)


def evaluate_run(
    pred_dir,
    records,
    model: str = "model",
    split: str = "test",
    offset: float = 1.0,
) -> MetricsReport:
    """Evaluate prediction tiles against the catalog's ground-truth DEMs.

    Predictions are single-band float32 tiles in the native format named
    ``<sample id>.rst``. Every sample of the requested split must have
    one; otherwise :class:`MissingPrediction` lists the offenders.
    """
    pred_dir = Path(pred_dir)
    chosen = [r for r in records if r.split == split]
    if not chosen:
        raise EmptyMask(f"no samples in split {split!r}")
    missing = [r.id for r in chosen if not (pred_dir / f"{r.id}.rst").exists()]
    if missing:
        raise MissingPrediction(sorted(missing))

    def generate():
        for rec in sorted(chosen, key=lambda r: r.id):
            gt_grid = load_tile(rec.dem_path)
            pred_grid = load_tile(pred_dir / f"{rec.id}.rst")
            gt = gt_grid.band(0).astype(np.float64)
            pred = pred_grid.band(0).astype(np.float64)
            mask = np.isfinite(gt) & np.isfinite(pred)
            if gt_grid.nodata is not None:
                mask &= gt != gt_grid.nodata
            yield rec.terrain, normalize_for_eval(pred, gt, mask, offset=offset)

    return evaluate_pairs(generate(), model=model)
