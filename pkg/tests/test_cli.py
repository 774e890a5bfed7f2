import json
import shutil
from pathlib import Path

import jsonschema
import pytest

from synthdata import fractal_dem, rgb_from_dem
from terrabench.catalog import load_manifest
from terrabench.cli import main
from terrabench.raster import save_tile
from terrabench.review import ReviewStore, VerdictRecord

SCHEMA = json.loads(
    (Path(__file__).parent.parent / "src/terrabench/schemas/cli_summary.schema.json").read_text()
)

# (relief, base) pairs cycling through the terrain decision list
TERRAIN_MIX = [
    (8.0, -10.0),     # Ocean
    (10.0, 50.0),     # Plain
    (150.0, 100.0),   # Hill
    (400.0, 200.0),   # LowUndulatingMountains
    (900.0, 300.0),   # HighUndulatingMountains
    (20.0, 1500.0),   # Highland
]
VOCAB_TEXTS = [
    "oceans near the coast",
    "wide plains with farmland",
    "rolling hills and a river",
    "low mountains with ridges",
    "high mountains above a lake",
    "highland plateau with plains",
]


def write_dataset(root: Path, n: int, size: int = 48):
    rgb_dir = root / "rgb"
    dem_dir = root / "dem"
    rgb_dir.mkdir(parents=True)
    dem_dir.mkdir(parents=True)
    ann_path = root / "annotations.jsonl"
    pixels = [30.0, 5.0, 2.0, 0.5]
    with open(ann_path, "w", encoding="utf-8") as f:
        for i in range(n):
            relief, base = TERRAIN_MIX[i % len(TERRAIN_MIX)]
            dem = fractal_dem(size, seed=i, relief=relief, base=base, pixel=pixels[i % 4])
            rgb = rgb_from_dem(dem, seed=i)
            save_tile(dem, dem_dir / f"t{i:03d}.rst")
            save_tile(rgb, rgb_dir / f"t{i:03d}.rst")
            f.write(json.dumps({"id": f"t{i:03d}", "text": VOCAB_TEXTS[i % len(VOCAB_TEXTS)]}) + "\n")
    return rgb_dir, dem_dir, ann_path


def run_cli(*argv, expect=0):
    code = main([str(a) for a in argv])
    assert code == expect, f"exit {code} != {expect} for {argv}"
    return code


def run_pipeline(root: Path, n: int = 12, size: int = 48, seed: int = 5, with_eval: bool = True):
    rgb_dir, dem_dir, ann = write_dataset(root / "src", n, size)
    manifest = root / "manifest.jsonl"
    aligned = root / "aligned"
    run_cli("ingest", "--rgb-dir", rgb_dir, "--dem-dir", dem_dir,
            "--annotations", ann, "--manifest", manifest)
    run_cli("--jobs", 2, "align", "--manifest", manifest, "--out-dir", aligned)
    run_cli("enhance", "--manifest", manifest)
    run_cli("classify", "--manifest", manifest)
    # human validation stage: accept everything through the review store
    store = ReviewStore(manifest)
    for rec in load_manifest(manifest):
        store.post_verdict(VerdictRecord(sample_id=rec.id, verdict="accept", reviewer="t"))
    run_cli("--seed", seed, "split", "--manifest", manifest)
    if not with_eval:
        return manifest, None
    pred_dir = root / "pred"
    pred_dir.mkdir(exist_ok=True)
    for rec in load_manifest(manifest):
        shutil.copy(rec.dem_path, pred_dir / f"{rec.id}.rst")
    report_path = root / "report.json"
    run_cli("eval", "--manifest", manifest, "--pred-dir", pred_dir, "--out", report_path)
    return manifest, report_path


class TestPipelineCommands:
    def test_full_pipeline(self, tmp_path):
        manifest, report_path = run_pipeline(tmp_path, n=12)
        records = load_manifest(manifest)
        assert len(records) == 12
        assert all(r.terrain is not None for r in records)
        assert all(r.alignment_score is not None for r in records)
        report = json.loads(report_path.read_text())
        for row in report["rows"].values():
            assert row["MAE"] == 0.0
            assert row["RMSE"] == 0.0
            assert row["delta"] == 100.0

    def test_classify_assigns_expected_classes(self, tmp_path):
        run_pipeline(tmp_path, n=6, with_eval=False)
        records = load_manifest(tmp_path / "manifest.jsonl")
        classes = {r.id: r.terrain for r in records}
        assert classes["t000"] == "Ocean"
        assert classes["t001"] == "Plain"
        assert classes["t002"] == "Hill"
        assert classes["t003"] == "LowUndulatingMountains"
        assert classes["t004"] == "HighUndulatingMountains"
        assert classes["t005"] == "Highland"

    def test_tiles_resized_to_canonical(self, tmp_path):
        run_pipeline(tmp_path, n=2, with_eval=False)
        from terrabench.raster import load_tile

        for rec in load_manifest(tmp_path / "manifest.jsonl"):
            assert load_tile(rec.rgb_path).width == 512
            assert load_tile(rec.dem_path).height == 512

    def test_stats_json_summary(self, tmp_path, capsys):
        run_pipeline(tmp_path, n=6, with_eval=False)
        capsys.readouterr()  # drain pipeline output
        code = main(["--json", "stats", "--manifest", str(tmp_path / "manifest.jsonl")])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        jsonschema.validate(doc, SCHEMA)
        props = doc["data"]["class_proportions"]
        assert sum(props.values()) == pytest.approx(1.0)
        assert set(props) == {
            "Ocean", "Plain", "Hill",
            "LowUndulatingMountains", "HighUndulatingMountains", "Highland",
        }

    def test_stats_csv_panels(self, tmp_path):
        run_pipeline(tmp_path, n=6, with_eval=False)
        out_dir = tmp_path / "statsout"
        run_cli("stats", "--manifest", tmp_path / "manifest.jsonl", "--out-dir", out_dir)
        assert (out_dir / "class_proportions.csv").exists()
        assert (out_dir / "elevation_histogram.csv").exists()
        assert (out_dir / "depth_counts.csv").exists()
        assert (out_dir / "stats.json").exists()

    def test_missing_prediction_exit_1(self, tmp_path, capsys):
        manifest, _ = run_pipeline(tmp_path, n=12)
        pred_dir = tmp_path / "pred"
        test_ids = [r.id for r in load_manifest(manifest) if r.split == "test"]
        (pred_dir / f"{test_ids[0]}.rst").unlink()
        capsys.readouterr()  # drain pipeline output
        code = main(["--json", "eval", "--manifest", str(manifest), "--pred-dir", str(pred_dir)])
        assert code == 1
        doc = json.loads(capsys.readouterr().out)
        jsonschema.validate(doc, SCHEMA)
        assert not doc["ok"]
        assert test_ids[0] in doc["error"]

    def test_unreadable_manifest_exit_2(self, tmp_path):
        code = main(["stats", "--manifest", str(tmp_path / "missing.jsonl")])
        assert code == 2

    def test_usage_error_exit_1(self):
        assert main(["no-such-command"]) == 1

    def test_split_balanced_mode(self, tmp_path):
        manifest, _ = run_pipeline(tmp_path, n=18, size=32)
        run_cli("--seed", 3, "split", "--manifest", manifest,
                "--balanced", "--per-class", 2, "--holdout", 6)
        records = load_manifest(manifest)
        test_ids = [r.id for r in records if r.split == "test"]
        train_ids = [r.id for r in records if r.split == "train"]
        assert len(test_ids) == 6
        assert len(train_ids) == 6
        assert set(test_ids).isdisjoint(train_ids)


class TestDiffuseVerify:
    def test_byte_identical_reports(self, capsys):
        assert main(["--json", "--seed", "7", "diffuse-verify"]) == 0
        first = capsys.readouterr().out
        assert main(["--json", "--seed", "7", "diffuse-verify"]) == 0
        second = capsys.readouterr().out
        assert first == second
        doc = json.loads(first)
        jsonschema.validate(doc, SCHEMA)
        assert doc["data"]["passed"] is True

    def test_different_seed_changes_measurements(self, capsys):
        main(["--json", "--seed", "1", "diffuse-verify"])
        a = capsys.readouterr().out
        main(["--json", "--seed", "2", "diffuse-verify"])
        b = capsys.readouterr().out
        assert a != b


class TestConfigFile:
    def test_config_values_and_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# pipeline configuration\n"
            "stretch.low = 2.0\n"
            "stretch.high = 98.0\n"
            "seed = 11\n"
        )
        rgb_dir, dem_dir, ann = write_dataset(tmp_path / "src", 2, 32)
        manifest = tmp_path / "m.jsonl"
        run_cli("ingest", "--rgb-dir", rgb_dir, "--dem-dir", dem_dir,
                "--annotations", ann, "--manifest", manifest)
        run_cli("align", "--manifest", manifest, "--out-dir", tmp_path / "a")
        capsys.readouterr()  # drain pipeline output
        code = main([
            "--json", "--config", str(cfg),
            "enhance", "--manifest", str(manifest), "--stretch-low", "5.0",
        ])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["data"]["stretch"] == {"low": 5.0, "high": 98.0}  # flag beats file

    def test_bad_config_exit_1(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("outlier.window = 4\n")
        assert main(["--config", str(cfg), "diffuse-verify"]) == 1

    def test_malformed_line_exit_1(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("just some words\n")
        assert main(["--config", str(cfg), "diffuse-verify"]) == 1


class TestIngestReporting:
    def test_unmatched_files_listed(self, tmp_path, capsys):
        rgb_dir, dem_dir, ann = write_dataset(tmp_path / "src", 2, 32)
        extra = fractal_dem(32, seed=99)
        save_tile(rgb_from_dem(extra), rgb_dir / "orphan.rst")
        code = main([
            "--json", "ingest", "--rgb-dir", str(rgb_dir), "--dem-dir", str(dem_dir),
            "--annotations", str(ann), "--manifest", str(tmp_path / "m.jsonl"),
        ])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert any("orphan" in p for p in doc["data"]["unmatched_rgb"])
