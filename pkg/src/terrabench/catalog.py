"""Dataset manifest, annotation vocabulary checks, and split generation.

The manifest is JSON-Lines (one record per line, snake_case fields,
UTF-8), append- and diff-friendly. Review verdicts live in a separate
log owned by the review service and are folded into the records on load.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateId,
    EmptyCatalog,
    InsufficientClassSamples,
    InsufficientStratum,
    NoPairsFound,
)

RESOLUTION_TIERS = (30.0, 5.0, 2.0, 0.5)
REVIEW_STATES = ("pending", "accepted", "rejected", "flagged")
SPLITS = ("train", "val", "test")

# Vocabulary used to prompt the annotation model; matching accepts
# singular and plural word forms and reports the canonical term.
ANNOTATION_VOCABULARY = (
    "mountains",
    "oceans",
    "lakes",
    "rivers",
    "plains",
    "islands",
    "ridges",
    "farmland",
)
_TERM_PATTERNS = {
    term: re.compile(rf"\b{term.rstrip('s')}s?\b", re.IGNORECASE) for term in ANNOTATION_VOCABULARY
}
_TERM_PATTERNS["farmland"] = re.compile(r"\bfarmlands?\b", re.IGNORECASE)

_TILE_EXTENSIONS = (".rst", ".tif", ".tiff")


@dataclass(frozen=True)
class AnnotationCheck:
    matched_terms: frozenset[str]
    valid: bool


def validate_annotation(text: str) -> AnnotationCheck:
    """Whole-word, case-insensitive match against the 8-term vocabulary."""
    matched = frozenset(
        term for term, pattern in _TERM_PATTERNS.items() if text and pattern.search(text)
    )
    return AnnotationCheck(matched, bool(matched))


@dataclass(frozen=True)
class SampleRecord:
    """One RGB-DEM-annotation triple with its curation state."""

    id: str
    rgb_path: str
    dem_path: str
    annotation: str = ""
    terrain: str | None = None
    resolution_tier: float | None = None
    review_state: str = "pending"
    split: str | None = None
    alignment_score: float | None = None

    def __post_init__(self):
        if self.review_state not in REVIEW_STATES:
            raise ValueError(f"bad review state {self.review_state!r}")
        if self.split is not None and self.split not in SPLITS:
            raise ValueError(f"bad split {self.split!r}")
        if self.split is not None and self.review_state != "accepted":
            raise ValueError("split may only be set on accepted samples")

    def to_json(self) -> str:
        return json.dumps(
            {
                "id": self.id,
                "rgb_path": self.rgb_path,
                "dem_path": self.dem_path,
                "annotation": self.annotation,
                "terrain": self.terrain,
                "resolution_tier": self.resolution_tier,
                "review_state": self.review_state,
                "split": self.split,
                "alignment_score": self.alignment_score,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "SampleRecord":
        raw = json.loads(line)
        return cls(
            id=raw["id"],
            rgb_path=raw["rgb_path"],
            dem_path=raw["dem_path"],
            annotation=raw.get("annotation", "") or "",
            terrain=raw.get("terrain"),
            resolution_tier=raw.get("resolution_tier"),
            review_state=raw.get("review_state", "pending"),
            split=raw.get("split"),
            alignment_score=raw.get("alignment_score"),
        )


def load_manifest(path) -> list[SampleRecord]:
    records = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = SampleRecord.from_json(line)
            if rec.id in seen:
                raise DuplicateId(f"duplicate sample id {rec.id!r} in manifest")
            seen.add(rec.id)
            records.append(rec)
    return records


def save_manifest(records, path) -> None:
    """Write a new manifest version (copy-on-write; records sorted by id)."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        for rec in sorted(records, key=lambda r: r.id):
            f.write(rec.to_json())
            f.write("\n")
    tmp.replace(path)


@dataclass
class ManifestBuild:
    records: list[SampleRecord]
    unmatched_rgb: list[str] = field(default_factory=list)
    unmatched_dem: list[str] = field(default_factory=list)


def _stems(directory) -> dict[str, Path]:
    out: dict[str, Path] = {}
    for p in sorted(Path(directory).iterdir()):
        if p.suffix.lower() not in _TILE_EXTENSIONS or not p.is_file():
            continue
        if p.stem in out:
            raise DuplicateId(f"stem {p.stem!r} appears twice in {directory}")
        out[p.stem] = p
    return out


def infer_resolution_tier(meters: float) -> float:
    """Snap a ground pixel size to the nearest catalog tier."""
    return min(RESOLUTION_TIERS, key=lambda t: abs(t - meters))


def build_manifest(rgb_dir, dem_dir, annotations_file=None) -> ManifestBuild:
    """Pair RGB and DEM tiles by filename stem into pending records.

    Annotations are read from a JSON-Lines file of {"id", "text"}.
    Unmatched files on either side are reported, not silently dropped.
    """
    rgb = _stems(rgb_dir)
    dem = _stems(dem_dir)
    annotations: dict[str, str] = {}
    if annotations_file is not None:
        with open(annotations_file, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                annotations[obj["id"]] = obj.get("text", "")
    matched = sorted(rgb.keys() & dem.keys())
    if not matched:
        raise NoPairsFound(f"no shared filename stems between {rgb_dir} and {dem_dir}")
    records = [
        SampleRecord(
            id=stem,
            rgb_path=str(rgb[stem]),
            dem_path=str(dem[stem]),
            annotation=annotations.get(stem, ""),
        )
        for stem in matched
    ]
    return ManifestBuild(
        records=records,
        unmatched_rgb=sorted(str(rgb[s]) for s in rgb.keys() - dem.keys()),
        unmatched_dem=sorted(str(dem[s]) for s in dem.keys() - rgb.keys()),
    )


def _allocate(n: int, ratios) -> list[int]:
    """Largest-remainder split of n into len(ratios) parts (within +-1 of exact)."""
    exact = [n * r for r in ratios]
    counts = [int(x) for x in exact]
    remainder = n - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: exact[i] - counts[i], reverse=True)
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def make_splits(
    records,
    ratios=(0.8, 0.1, 0.1),
    seed: int = 0,
    stratify: bool = False,
) -> dict[str, str]:
    """Assign train/val/test deterministically; returns {id: split}.

    With ``stratify`` the ratios are applied inside each terrain class
    (every stratum must have at least 3 samples). Per-stratum counts match
    the ratios within one sample.
    """
    records = list(records)
    if not records:
        raise EmptyCatalog("cannot split an empty catalog")
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
        raise ValueError(f"ratios must be three non-negative values summing to 1, got {ratios}")
    strata: dict[str, list[str]]
    if stratify:
        strata = {}
        for rec in records:
            strata.setdefault(rec.terrain or "unclassified", []).append(rec.id)
        for name, ids in strata.items():
            if len(ids) < 3:
                raise InsufficientStratum(f"stratum {name!r} has {len(ids)} < 3 samples")
    else:
        strata = {"all": [rec.id for rec in records]}

    rng = np.random.default_rng(seed)
    assignment: dict[str, str] = {}
    for name in sorted(strata):
        ids = sorted(strata[name])
        rng.shuffle(ids)
        n_train, n_val, n_test = _allocate(len(ids), ratios)
        for i, sample_id in enumerate(ids):
            if i < n_train:
                assignment[sample_id] = "train"
            elif i < n_train + n_val:
                assignment[sample_id] = "val"
            else:
                assignment[sample_id] = "test"
    return assignment


def apply_splits(records, assignment: dict[str, str]) -> list[SampleRecord]:
    return [
        replace(rec, split=assignment[rec.id]) if rec.id in assignment else rec
        for rec in records
    ]


def balanced_subset(
    records,
    per_class: int,
    holdout: int,
    seed: int = 0,
) -> tuple[list[SampleRecord], list[SampleRecord]]:
    """Draw a class-balanced pool and carve a uniformly distributed holdout.

    ``per_class`` samples are drawn from every terrain class; ``holdout``
    of the pooled samples form the eval set, spread as evenly as possible
    across classes (extra samples go to the alphabetically first classes).
    Train and eval are disjoint; the draw is deterministic given the seed.
    """
    by_class: dict[str, list[SampleRecord]] = {}
    for rec in records:
        by_class.setdefault(rec.terrain or "unclassified", []).append(rec)
    classes = sorted(by_class)
    if not classes:
        raise EmptyCatalog("cannot subset an empty catalog")
    for name in classes:
        if len(by_class[name]) < per_class:
            raise InsufficientClassSamples(
                f"class {name!r} has {len(by_class[name])} samples, need {per_class}"
            )
    if holdout > per_class * len(classes):
        raise ValueError("holdout larger than the drawn pool")

    rng = np.random.default_rng(seed)
    base = holdout // len(classes)
    extras = holdout % len(classes)
    train: list[SampleRecord] = []
    eval_set: list[SampleRecord] = []
    for i, name in enumerate(classes):
        pool = sorted(by_class[name], key=lambda r: r.id)
        rng.shuffle(pool)
        drawn = pool[:per_class]
        n_eval = base + (1 if i < extras else 0)
        eval_set.extend(drawn[:n_eval])
        train.extend(drawn[n_eval:])
    return train, eval_set
