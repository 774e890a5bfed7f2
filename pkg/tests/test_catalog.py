import json
from collections import Counter

import pytest

from terrabench.catalog import (
    SampleRecord,
    balanced_subset,
    build_manifest,
    infer_resolution_tier,
    load_manifest,
    make_splits,
    save_manifest,
    validate_annotation,
)
from terrabench.errors import (
    DuplicateId,
    EmptyCatalog,
    InsufficientClassSamples,
    InsufficientStratum,
    NoPairsFound,
)


class TestValidateAnnotation:
    def test_mixed_sentence(self):
        check = validate_annotation("Plains and a river crossing farmland")
        assert check.matched_terms == {"plains", "rivers", "farmland"}
        assert check.valid

    def test_empty_invalid(self):
        check = validate_annotation("")
        assert check.matched_terms == frozenset()
        assert not check.valid

    def test_case_insensitive(self):
        assert validate_annotation("MOUNTAINS").matched_terms == {"mountains"}

    def test_singular_forms(self):
        check = validate_annotation("an island with a lake and a ridge")
        assert check.matched_terms == {"islands", "lakes", "ridges"}

    def test_whole_word_only(self):
        # "riverside" must not count as "river"
        assert not validate_annotation("riverside boulevard").valid

    def test_idempotent_and_order_insensitive(self):
        a = validate_annotation("ocean mountains ocean")
        b = validate_annotation("mountains ocean")
        assert a.matched_terms == b.matched_terms == {"oceans", "mountains"}


def records_with_classes(spec: dict[str, int], accepted=True) -> list[SampleRecord]:
    out = []
    i = 0
    for terrain, count in spec.items():
        for _ in range(count):
            out.append(
                SampleRecord(
                    id=f"s{i:05d}",
                    rgb_path=f"rgb/{i}.rst",
                    dem_path=f"dem/{i}.rst",
                    terrain=terrain,
                    review_state="accepted" if accepted else "pending",
                )
            )
            i += 1
    return out


class TestMakeSplits:
    def test_100_samples_80_10_10(self):
        records = records_with_classes({"Plain": 100})
        assignment = make_splits(records, (0.8, 0.1, 0.1), seed=7)
        counts = Counter(assignment.values())
        assert counts == {"train": 80, "val": 10, "test": 10}

    def test_same_seed_identical(self):
        records = records_with_classes({"Plain": 53, "Hill": 31})
        a = make_splits(records, seed=3, stratify=True)
        b = make_splits(records, seed=3, stratify=True)
        assert a == b

    def test_different_seed_differs(self):
        records = records_with_classes({"Plain": 200})
        assert make_splits(records, seed=1) != make_splits(records, seed=2)

    def test_stratified_class_balance(self):
        records = records_with_classes({"Plain": 50, "Hill": 50})
        assignment = make_splits(records, (0.8, 0.1, 0.1), seed=5, stratify=True)
        by_id = {r.id: r.terrain for r in records}
        for terrain in ("Plain", "Hill"):
            counts = Counter(
                split for sid, split in assignment.items() if by_id[sid] == terrain
            )
            assert abs(counts["train"] - 40) <= 1
            assert abs(counts["val"] - 5) <= 1
            assert abs(counts["test"] - 5) <= 1

    def test_partition_property(self):
        records = records_with_classes({"Plain": 41, "Hill": 17, "Ocean": 9})
        assignment = make_splits(records, seed=11, stratify=True)
        assert set(assignment) == {r.id for r in records}

    def test_small_stratum_rejected(self):
        records = records_with_classes({"Plain": 10, "Hill": 2})
        with pytest.raises(InsufficientStratum):
            make_splits(records, seed=0, stratify=True)

    def test_empty_catalog(self):
        with pytest.raises(EmptyCatalog):
            make_splits([], seed=0)

    def test_bad_ratios(self):
        records = records_with_classes({"Plain": 10})
        with pytest.raises(ValueError):
            make_splits(records, (0.5, 0.2, 0.2), seed=0)


class TestBalancedSubset:
    def test_benchmark_counts(self):
        spec = {
            "Ocean": 400,
            "Plain": 450,
            "Hill": 420,
            "LowUndulatingMountains": 410,
            "HighUndulatingMountains": 480,
            "Highland": 405,
        }
        records = records_with_classes(spec)
        train, eval_set = balanced_subset(records, per_class=400, holdout=200, seed=9)
        assert len(train) == 2200
        assert len(eval_set) == 200
        eval_counts = Counter(r.terrain for r in eval_set)
        assert sorted(eval_counts.values()) == [33, 33, 33, 33, 34, 34]
        assert set(r.id for r in train).isdisjoint(r.id for r in eval_set)

    def test_insufficient_class(self):
        records = records_with_classes({"Plain": 400, "Hill": 399})
        with pytest.raises(InsufficientClassSamples):
            balanced_subset(records, per_class=400, holdout=100, seed=0)

    def test_deterministic(self):
        records = records_with_classes({"Plain": 30, "Hill": 30})
        a = balanced_subset(records, per_class=20, holdout=10, seed=4)
        b = balanced_subset(records, per_class=20, holdout=10, seed=4)
        assert [r.id for r in a[0]] == [r.id for r in b[0]]
        assert [r.id for r in a[1]] == [r.id for r in b[1]]


class TestManifestIo:
    def test_round_trip(self, tmp_path):
        records = records_with_classes({"Plain": 3, "Hill": 2})
        path = tmp_path / "manifest.jsonl"
        save_manifest(records, path)
        loaded = load_manifest(path)
        assert loaded == sorted(records, key=lambda r: r.id)

    def test_split_only_on_accepted(self):
        with pytest.raises(ValueError):
            SampleRecord(
                id="x", rgb_path="a", dem_path="b", review_state="pending", split="train"
            )

    def test_duplicate_id_rejected(self, tmp_path):
        rec = SampleRecord(id="dup", rgb_path="a", dem_path="b")
        path = tmp_path / "m.jsonl"
        path.write_text(rec.to_json() + "\n" + rec.to_json() + "\n")
        with pytest.raises(DuplicateId):
            load_manifest(path)


class TestBuildManifest:
    def _mk_tiles(self, tmp_path, rgb_stems, dem_stems):
        rgb_dir = tmp_path / "rgb"
        dem_dir = tmp_path / "dem"
        rgb_dir.mkdir()
        dem_dir.mkdir()
        for stem in rgb_stems:
            (rgb_dir / f"{stem}.rst").write_bytes(b"{}\n")
        for stem in dem_stems:
            (dem_dir / f"{stem}.rst").write_bytes(b"{}\n")
        return rgb_dir, dem_dir

    def test_three_matched_stems(self, tmp_path):
        rgb_dir, dem_dir = self._mk_tiles(tmp_path, ["a", "b", "c"], ["a", "b", "c"])
        build = build_manifest(rgb_dir, dem_dir)
        assert [r.id for r in build.records] == ["a", "b", "c"]
        assert all(r.review_state == "pending" for r in build.records)

    def test_unmatched_reported(self, tmp_path):
        rgb_dir, dem_dir = self._mk_tiles(tmp_path, ["a", "orphan"], ["a"])
        build = build_manifest(rgb_dir, dem_dir)
        assert [r.id for r in build.records] == ["a"]
        assert build.unmatched_rgb == [str(rgb_dir / "orphan.rst")]
        assert build.unmatched_dem == []

    def test_duplicate_stem_rejected(self, tmp_path):
        rgb_dir, dem_dir = self._mk_tiles(tmp_path, ["a"], ["a"])
        (rgb_dir / "a.tif").write_bytes(b"II")
        with pytest.raises(DuplicateId):
            build_manifest(rgb_dir, dem_dir)

    def test_no_pairs(self, tmp_path):
        rgb_dir, dem_dir = self._mk_tiles(tmp_path, ["a"], ["b"])
        with pytest.raises(NoPairsFound):
            build_manifest(rgb_dir, dem_dir)

    def test_annotations_attached(self, tmp_path):
        rgb_dir, dem_dir = self._mk_tiles(tmp_path, ["a"], ["a"])
        ann = tmp_path / "ann.jsonl"
        ann.write_text(json.dumps({"id": "a", "text": "mountains and lakes"}) + "\n")
        build = build_manifest(rgb_dir, dem_dir, ann)
        assert build.records[0].annotation == "mountains and lakes"


class TestResolutionTier:
    def test_snaps_to_catalog_tiers(self):
        assert infer_resolution_tier(29.1) == 30.0
        assert infer_resolution_tier(5.2) == 5.0
        assert infer_resolution_tier(1.9) == 2.0
        assert infer_resolution_tier(0.45) == 0.5
