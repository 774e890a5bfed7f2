"""Command-line entry point orchestrating the curation pipeline.

Subcommands: ingest, align, enhance, classify, stats, split, eval,
diffuse-verify, serve. Exit codes: 0 success, 1 validation failure,
2 I/O error. With ``--json`` each run prints one machine-readable
summary document validating against schemas/cli_summary.schema.json.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .catalog import (
    apply_splits,
    balanced_subset,
    build_manifest,
    load_manifest,
    make_splits,
    save_manifest,
)
from .config import PipelineConfig, build_config, parse_kv_file
from .errors import ConfigError, IoFailure, TerrabenchError
from .evaluate import evaluate_run
from .pipeline import StatsSample, run_align, run_classify, run_enhance
from .terrain import dataset_stats
from .verification import run_verification

log = logging.getLogger("terrabench")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="terrabench", description=__doc__)
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--jobs", type=int, help="worker count for per-tile stages")
    parser.add_argument("--seed", type=int, help="seed for all randomized steps")
    parser.add_argument("--json", action="store_true", help="machine-readable summary on stdout")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="pair RGB/DEM tiles into a manifest")
    p.add_argument("--rgb-dir", required=True)
    p.add_argument("--dem-dir", required=True)
    p.add_argument("--annotations", help="JSONL of {id, text}")
    p.add_argument("--manifest", required=True, help="output manifest path")

    p = sub.add_parser("align", help="register DEMs onto RGB grids and repair outliers")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("enhance", help="three-stage RGB stretch")
    p.add_argument("--manifest", required=True)
    p.add_argument("--stretch-low", type=float, help="lower percentile (default 1)")
    p.add_argument("--stretch-high", type=float, help="upper percentile (default 99)")

    p = sub.add_parser("classify", help="assign terrain classes from DEMs")
    p.add_argument("--manifest", required=True)

    p = sub.add_parser("stats", help="dataset statistics report")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", help="also write JSON + CSV tables here")

    p = sub.add_parser("split", help="assign train/val/test or draw a balanced subset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratios", type=float, nargs=3, default=(0.8, 0.1, 0.1))
    p.add_argument("--stratify", action="store_true")
    p.add_argument("--balanced", action="store_true", help="balanced per-class subset mode")
    p.add_argument("--per-class", type=int, default=400)
    p.add_argument("--holdout", type=int, default=200)

    p = sub.add_parser("eval", help="score prediction tiles against the catalog")
    p.add_argument("--manifest", required=True)
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--model", default="model")
    p.add_argument("--split", default=None, help="split to evaluate (default from config)")
    p.add_argument("--out", help="write the JSON report here")

    p = sub.add_parser("diffuse-verify", help="run the diffusion verification suite")

    p = sub.add_parser("serve", help="start the review service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--addr", default="127.0.0.1:8000")
    p.add_argument("--verdicts", help="verdict log path (default <manifest>.verdicts.jsonl)")
    p.add_argument("--ui-dir", help="static directory with the review UI build")

    return parser


def _load_pipeline_config(args) -> PipelineConfig:
    values = parse_kv_file(args.config) if args.config else {}
    # flags win over config file values
    if args.seed is not None:
        values["seed"] = args.seed
    if args.jobs is not None:
        values["jobs"] = args.jobs
    if getattr(args, "stretch_low", None) is not None:
        values["stretch.low"] = args.stretch_low
    if getattr(args, "stretch_high", None) is not None:
        values["stretch.high"] = args.stretch_high
    return build_config(values)


def _folded_manifest(path):
    from .review import default_verdict_log, fold_verdicts

    records = load_manifest(path)
    return fold_verdicts(records, default_verdict_log(path))


def cmd_ingest(args, cfg) -> dict:
    build = build_manifest(args.rgb_dir, args.dem_dir, args.annotations)
    save_manifest(build.records, args.manifest)
    return {
        "manifest": str(args.manifest),
        "samples": len(build.records),
        "unmatched_rgb": build.unmatched_rgb,
        "unmatched_dem": build.unmatched_dem,
    }


def cmd_align(args, cfg) -> dict:
    records = load_manifest(args.manifest)
    updated = run_align(records, args.out_dir, cfg)
    save_manifest(updated, args.manifest)
    scores = [r.alignment_score for r in updated if r.alignment_score is not None]
    return {
        "samples": len(updated),
        "out_dir": str(args.out_dir),
        "mean_alignment_score": sum(scores) / len(scores) if scores else None,
    }


def cmd_enhance(args, cfg) -> dict:
    records = load_manifest(args.manifest)
    run_enhance(records, cfg)
    return {
        "samples": len(records),
        "stretch": {"low": cfg.stretch.p_low, "high": cfg.stretch.p_high},
    }


def cmd_classify(args, cfg) -> dict:
    records = load_manifest(args.manifest)
    updated = run_classify(records, cfg)
    save_manifest(updated, args.manifest)
    counts: dict[str, int] = {}
    for rec in updated:
        counts[rec.terrain] = counts.get(rec.terrain, 0) + 1
    return {"samples": len(updated), "class_counts": dict(sorted(counts.items()))}


def cmd_stats(args, cfg) -> dict:
    records = _folded_manifest(args.manifest)
    stats = dataset_stats([StatsSample(rec) for rec in records])
    report = {
        "total_samples": stats.total_samples,
        "class_proportions": stats.class_proportions,
        "elevation_bin_edges": stats.bin_edges,
        "elevation_histogram_by_class": stats.elevation_histogram_by_class,
        "depth_count_cube_root": {
            f"{tier}|{cls}": value for (tier, cls), value in stats.depth_count_cube_root.items()
        },
    }
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "stats.json", "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2, sort_keys=True)
        _write_stats_csvs(stats, out)
        report["out_dir"] = str(out)
    return report


def _write_stats_csvs(stats, out: Path) -> None:
    # one table per statistics panel: proportions, histograms, pixel counts
    with open(out / "class_proportions.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["terrain", "proportion"])
        for cls, p in stats.class_proportions.items():
            w.writerow([cls, f"{p:.6f}"])
    with open(out / "elevation_histogram.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["terrain", "bin_low_m", "bin_high_m", "pixels"])
        edges = stats.bin_edges
        for cls, counts in stats.elevation_histogram_by_class.items():
            for i, count in enumerate(counts):
                w.writerow([cls, edges[i], edges[i + 1], count])
    with open(out / "depth_counts.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["resolution_tier_m", "terrain", "cube_root_pixels"])
        for (tier, cls), value in stats.depth_count_cube_root.items():
            w.writerow([tier, cls, f"{value:.6f}"])


def cmd_split(args, cfg) -> dict:
    from dataclasses import replace

    # a split run defines the whole assignment; stale splits are cleared
    records = [replace(r, split=None) for r in _folded_manifest(args.manifest)]
    accepted = [r for r in records if r.review_state == "accepted"]
    if args.balanced:
        train, eval_set = balanced_subset(accepted, args.per_class, args.holdout, cfg.seed)
        assignment = {r.id: "train" for r in train}
        assignment.update({r.id: "test" for r in eval_set})
        data = {"mode": "balanced", "train": len(train), "eval": len(eval_set)}
    else:
        assignment = make_splits(accepted, tuple(args.ratios), cfg.seed, args.stratify)
        counts = {"train": 0, "val": 0, "test": 0}
        for split in assignment.values():
            counts[split] += 1
        data = {"mode": "ratios", **counts}
    save_manifest(apply_splits(records, assignment), args.manifest)
    data["assigned"] = len(assignment)
    return data


def cmd_eval(args, cfg) -> dict:
    records = _folded_manifest(args.manifest)
    split = args.split or cfg.eval_split
    report = evaluate_run(
        args.pred_dir, records, model=args.model, split=split, offset=cfg.eval_offset
    )
    payload = report.to_dict()
    if args.out:
        out = Path(args.out)
        with open(out, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
        out.with_suffix(".txt").write_text(report.to_text() + "\n", encoding="utf-8")
        payload["out"] = str(out)
    if not args.json:
        print(report.to_text())
        return {"out": payload["out"]} if args.out else {}
    return payload


def cmd_diffuse_verify(args, cfg) -> dict:
    return run_verification(cfg.seed)


def cmd_serve(args, cfg) -> dict:
    import uvicorn

    from .review import create_app

    host, _, port = args.addr.partition(":")
    app = create_app(args.manifest, args.verdicts, args.ui_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="info")
    return {"served": args.addr}


_COMMANDS = {
    "ingest": cmd_ingest,
    "align": cmd_align,
    "enhance": cmd_enhance,
    "classify": cmd_classify,
    "stats": cmd_stats,
    "split": cmd_split,
    "eval": cmd_eval,
    "diffuse-verify": cmd_diffuse_verify,
    "serve": cmd_serve,
}


def _emit(args, command: str, ok: bool, data: dict | None = None, error: str | None = None):
    if args is not None and args.json:
        doc = {"command": command, "ok": ok, "data": data if data is not None else {}}
        if error is not None:
            doc["error"] = error
        print(json.dumps(doc, indent=2, sort_keys=True))
    elif error is not None:
        print(f"error: {error}", file=sys.stderr)
    elif data:
        for key, value in data.items():
            print(f"{key}: {value}")


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _load_pipeline_config(args)
        data = _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        _emit(args, args.command, False, error=str(exc))
        return 1
    except (IoFailure, OSError) as exc:
        _emit(args, args.command, False, error=str(exc))
        return 2
    except TerrabenchError as exc:
        _emit(args, args.command, False, error=str(exc))
        return 1
    _emit(args, args.command, True, data)
    if args.command == "diffuse-verify" and not data.get("passed", False):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
