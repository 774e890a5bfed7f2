"""Human-validation service: pending-pair queue, previews, verdict log.

State is a deterministic fold over an append-only JSONL verdict log
(latest verdict per sample wins), so replaying the log after a crash
reconstructs the exact review state. A single lock serializes writers;
readers see consistent snapshots. Persistence is plain files; no
database.
"""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse

from .catalog import SampleRecord, load_manifest
from .errors import (
    InvalidPage,
    MalformedVerdict,
    SampleNotFound,
    TileUnreadable,
)
from .preview import PREVIEW_KINDS, render_preview
from .raster import load_tile

MAX_PAGE_SIZE = 200
VERDICTS = ("accept", "reject", "flag")
_VERDICT_TO_STATE = {"accept": "accepted", "reject": "rejected", "flag": "flagged"}


@dataclass(frozen=True)
class VerdictRecord:
    """One human decision; the log keeps every submission, latest wins."""

    sample_id: str
    verdict: str
    reviewer: str
    reason: str | None = None
    timestamp: str | None = None  # UTC ISO-8601, set at append time

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise MalformedVerdict(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")
        if not self.sample_id:
            raise MalformedVerdict("sample_id must be non-empty")
        if not self.reviewer:
            raise MalformedVerdict("reviewer must be non-empty")


def default_verdict_log(manifest_path) -> Path:
    return Path(manifest_path).with_suffix(".verdicts.jsonl")


def load_verdict_log(log_path) -> list[VerdictRecord]:
    out = []
    with open(log_path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            out.append(
                VerdictRecord(
                    sample_id=raw["sample_id"],
                    verdict=raw["verdict"],
                    reviewer=raw["reviewer"],
                    reason=raw.get("reason"),
                    timestamp=raw.get("timestamp"),
                )
            )
    return out


def reviewed_record(rec: SampleRecord, verdict: VerdictRecord) -> SampleRecord:
    """Record with the verdict folded in; rejection clears any split."""
    state = _VERDICT_TO_STATE[verdict.verdict]
    split = rec.split if state == "accepted" else None
    return replace(rec, review_state=state, split=split)


def fold_verdicts(records, log_path) -> list[SampleRecord]:
    """Fold a verdict log into manifest records (latest verdict per sample wins)."""
    by_id = {rec.id: rec for rec in records}
    if Path(log_path).exists():
        for verdict in load_verdict_log(log_path):
            if verdict.sample_id in by_id:
                by_id[verdict.sample_id] = reviewed_record(by_id[verdict.sample_id], verdict)
    return list(by_id.values())


class ReviewStore:
    """Manifest view plus the append-only verdict log."""

    def __init__(self, manifest_path, verdict_log_path=None):
        self.manifest_path = Path(manifest_path)
        self.verdict_log_path = (
            Path(verdict_log_path)
            if verdict_log_path is not None
            else default_verdict_log(manifest_path)
        )
        self._lock = threading.Lock()
        self._records: dict[str, SampleRecord] = {
            rec.id: rec for rec in load_manifest(self.manifest_path)
        }
        self._active: dict[str, VerdictRecord] = {}
        if self.verdict_log_path.exists():
            for record in load_verdict_log(self.verdict_log_path):
                if record.sample_id in self._records:
                    self._apply(record)

    def _apply(self, record: VerdictRecord) -> None:
        self._active[record.sample_id] = record
        rec = self._records[record.sample_id]
        self._records[record.sample_id] = reviewed_record(rec, record)

    def record(self, sample_id: str) -> SampleRecord:
        rec = self._records.get(sample_id)
        if rec is None:
            raise SampleNotFound(f"unknown sample id {sample_id!r}")
        return rec

    def post_verdict(self, record: VerdictRecord) -> VerdictRecord:
        """Append a verdict; identical duplicate submissions are no-ops."""
        if record.sample_id not in self._records:
            raise SampleNotFound(f"unknown sample id {record.sample_id!r}")
        with self._lock:
            current = self._active.get(record.sample_id)
            if (
                current is not None
                and current.verdict == record.verdict
                and current.reviewer == record.reviewer
                and (current.reason or None) == (record.reason or None)
            ):
                return current  # idempotent duplicate
            stamped = VerdictRecord(
                sample_id=record.sample_id,
                verdict=record.verdict,
                reviewer=record.reviewer,
                reason=record.reason,
                timestamp=record.timestamp
                or datetime.now(timezone.utc).isoformat(timespec="seconds"),
            )
            with open(self.verdict_log_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(asdict(stamped), sort_keys=True))
                f.write("\n")
            self._apply(stamped)
            return stamped

    def list_pairs(self, state: str | None = None, page: int = 1, page_size: int = 50):
        """Deterministic queue: alignment score ascending (unscored last), then id."""
        if page < 1 or page_size < 1 or page_size > MAX_PAGE_SIZE:
            raise InvalidPage(f"page >= 1 and 1 <= page_size <= {MAX_PAGE_SIZE} required")
        records = [
            r
            for r in self._records.values()
            if state is None or r.review_state == state
        ]
        records.sort(
            key=lambda r: (
                r.alignment_score is None,
                r.alignment_score if r.alignment_score is not None else 0.0,
                r.id,
            )
        )
        start = (page - 1) * page_size
        return records[start:start + page_size], len(records)

    def stats(self) -> dict:
        counts = {state: 0 for state in ("pending", "accepted", "rejected", "flagged")}
        for rec in self._records.values():
            counts[rec.review_state] += 1
        reviewed = counts["accepted"] + counts["rejected"] + counts["flagged"]
        rate = counts["rejected"] / reviewed if reviewed else 0.0
        return {
            "counts": counts,
            "total": len(self._records),
            "reviewed": reviewed,
            "rejection_rate": rate,
        }

    def preview(self, sample_id: str, kind: str) -> bytes:
        rec = self.record(sample_id)
        if kind not in PREVIEW_KINDS:
            raise ValueError(f"unknown preview kind {kind!r}")
        path = rec.rgb_path if kind == "rgb" else rec.dem_path
        try:
            grid = load_tile(path)
        except Exception as exc:
            raise TileUnreadable(f"cannot load tile for {sample_id!r}: {exc}") from exc
        return render_preview(kind, grid)


def _summary(rec: SampleRecord) -> dict:
    return {
        "id": rec.id,
        "annotation": rec.annotation,
        "terrain": rec.terrain,
        "resolution_tier": rec.resolution_tier,
        "review_state": rec.review_state,
        "split": rec.split,
        "alignment_score": rec.alignment_score,
    }


def create_app(manifest_path, verdict_log_path=None, ui_dir=None) -> FastAPI:
    """Build the review API around a manifest and its verdict log."""
    store = ReviewStore(manifest_path, verdict_log_path)
    app = FastAPI(title="terrabench review service")
    app.state.store = store

    @app.exception_handler(SampleNotFound)
    async def _not_found(_, exc):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(MalformedVerdict)
    async def _bad_verdict(_, exc):
        return JSONResponse(status_code=422, content={"error": str(exc)})

    @app.exception_handler(InvalidPage)
    async def _bad_page(_, exc):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(TileUnreadable)
    async def _bad_tile(_, exc):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.get("/api/pairs")
    def list_pairs(state: str | None = None, page: int = 1, page_size: int = 50):
        records, total = store.list_pairs(state, page, page_size)
        return {
            "items": [_summary(r) for r in records],
            "page": page,
            "page_size": page_size,
            "total": total,
        }

    @app.get("/api/pairs/{sample_id}")
    def get_pair(sample_id: str):
        return _summary(store.record(sample_id))

    @app.get("/api/pairs/{sample_id}/preview")
    def get_preview(sample_id: str, kind: str = "rgb"):
        if kind not in PREVIEW_KINDS:
            return JSONResponse(
                status_code=400,
                content={"error": f"kind must be one of {PREVIEW_KINDS}"},
            )
        return Response(content=store.preview(sample_id, kind), media_type="image/png")

    @app.post("/api/pairs/{sample_id}/verdict")
    def post_verdict(sample_id: str, body: dict):
        record = VerdictRecord(
            sample_id=sample_id,
            verdict=body.get("verdict", ""),
            reviewer=body.get("reviewer", ""),
            reason=body.get("reason"),
        )
        stored = store.post_verdict(record)
        return {"ok": True, "verdict": asdict(stored)}

    @app.get("/api/stats")
    def stats():
        return store.stats()

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
