import json
import math

import numpy as np
import pytest

from travrank.errors import SingleImageDataset, UnknownClassId
from travrank.pairgen import (
    DEFAULT_TIER_TABLE,
    PairTask,
    TierTable,
    autolabel_from_tiers,
    derived_rng,
    generate_pair_tasks,
    load_tier_spec,
    read_tasks,
    sample_biased_point,
    sample_cross_pair,
    sample_intra_pair,
    tier_spec_from_json,
    write_tasks,
)
from travrank.types import DatasetManifest, ImageEntry


def make_manifest(n, width=424, height=240):
    return DatasetManifest(
        images=tuple(
            ImageEntry(f"img{i:03d}", f"img{i:03d}.png", width, height) for i in range(n)
        )
    )


def test_intra_pair_distance_property():
    rng = derived_rng(7, "test")
    for _ in range(10_000):
        a, b = sample_intra_pair("img", 424, 240, rng)
        assert math.hypot(a.x - b.x, a.y - b.y) >= 12.0
        assert 0 <= a.x < 424 and 0 <= a.y < 240
        assert 0 <= b.x < 424 and 0 <= b.y < 240


def test_intra_pair_distance_tiny_image():
    rng = derived_rng(7, "tiny")
    for _ in range(10_000):
        a, b = sample_intra_pair("img", 16, 16, rng)
        assert math.hypot(a.x - b.x, a.y - b.y) >= 0.8


def test_intra_pair_deterministic_under_seed():
    one = sample_intra_pair("img", 424, 240, derived_rng(5, "x"))
    two = sample_intra_pair("img", 424, 240, derived_rng(5, "x"))
    assert one == two


def test_cross_pair_two_image_manifest():
    manifest = make_manifest(2)
    rng = derived_rng(3, "cross")
    for _ in range(50):
        a, b = sample_cross_pair(manifest, "img000", rng)
        assert a.image_id == "img000"
        assert b.image_id == "img001"


def test_cross_pair_single_image_rejected():
    with pytest.raises(SingleImageDataset):
        sample_cross_pair(make_manifest(1), "img000", derived_rng(1, "c"))


def test_cross_pair_partner_distribution_uniform():
    # chi-square over 99 partner bins, 10^4 draws; well under the 0.999 quantile
    manifest = make_manifest(100)
    rng = derived_rng(11, "uniform")
    counts = {}
    n = 10_000
    for _ in range(n):
        _, b = sample_cross_pair(manifest, "img000", rng)
        counts[b.image_id] = counts.get(b.image_id, 0) + 1
    assert len(counts) == 99
    expected = n / 99
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    assert chi2 < 150.0  # dof=98; exceeding 150 has p ~ 4e-4


def test_generate_tasks_counts_and_determinism():
    manifest = make_manifest(2)
    tasks = generate_pair_tasks(manifest, seed=13)
    assert len(tasks) == 4
    kinds = sorted(t.kind for t in tasks)
    assert kinds == ["cross", "cross", "intra", "intra"]
    again = generate_pair_tasks(manifest, seed=13)
    assert tasks == again
    other = generate_pair_tasks(manifest, seed=14)
    assert tasks != other


def test_generate_tasks_per_image_accounting():
    manifest = make_manifest(9)
    tasks = generate_pair_tasks(manifest, seed=2)
    intra_owner = [t.a.image_id for t in tasks if t.kind == "intra"]
    cross_owner = [t.a.image_id for t in tasks if t.kind == "cross"]
    ids = [e.image_id for e in manifest.images]
    assert sorted(intra_owner) == sorted(ids)
    assert sorted(cross_owner) == sorted(ids)
    for t in tasks:
        if t.kind == "cross":
            assert t.a.image_id != t.b.image_id


def test_generate_tasks_intra_only_single_image():
    manifest = make_manifest(1)
    tasks = generate_pair_tasks(manifest, seed=4, intra_only=True)
    assert len(tasks) == 1 and tasks[0].kind == "intra"
    with pytest.raises(SingleImageDataset):
        generate_pair_tasks(manifest, seed=4)


def test_biased_point_forced_cases():
    rng = derived_rng(5, "biased")
    for _ in range(500):
        x, y = sample_biased_point(64, 240, rng, bottom_fraction=1.0)
        assert y >= 120
    ys = [sample_biased_point(64, 240, rng, bottom_fraction=0.0)[1] for _ in range(2000)]
    assert min(ys) < 120  # unbiased sampling reaches the top half


def test_biased_point_expected_fraction():
    # bottom_fraction 0.9 on an even-height image: 0.9 + 0.1 * 0.5 = 0.95
    rng = derived_rng(17, "mc")
    n = 100_000
    hits = sum(
        1 for _ in range(n) if sample_biased_point(64, 240, rng, bottom_fraction=0.9)[1] >= 120
    )
    assert abs(hits / n - 0.95) < 0.005


def test_task_file_round_trip(tmp_path):
    manifest = make_manifest(3)
    tasks = generate_pair_tasks(manifest, seed=8)
    write_tasks(tasks, tmp_path / "tasks.jsonl")
    again = read_tasks(tmp_path / "tasks.jsonl")
    assert again == tasks
    doc = json.loads((tmp_path / "tasks.jsonl").read_text().splitlines()[0])
    assert set(doc) == {"pair_id", "kind", "a", "b", "status"}
    assert doc["status"] == "pending"


def test_autolabel_default_tiers():
    assert autolabel_from_tiers("grass", "concrete", DEFAULT_TIER_TABLE) == 1
    assert autolabel_from_tiers("water", "bush", DEFAULT_TIER_TABLE) == 0
    assert autolabel_from_tiers("asphalt", "water", DEFAULT_TIER_TABLE) == -1
    assert autolabel_from_tiers("tree", "sky", DEFAULT_TIER_TABLE) == 0  # both default tier 0


def test_autolabel_antisymmetry():
    names = ["concrete", "asphalt", "dirt", "grass", "water", "bush", "tree", "pole"]
    for a in names:
        for b in names:
            assert autolabel_from_tiers(a, b, DEFAULT_TIER_TABLE) == -autolabel_from_tiers(
                b, a, DEFAULT_TIER_TABLE
            )


def test_tier_table_unknown_class():
    table = TierTable(class_to_tier={"grass": 2})
    with pytest.raises(UnknownClassId):
        table.tier_of("lava")
    assert TierTable(class_to_tier={}, default_tier=0).tier_of("lava") == 0


def test_tier_spec_round_trip(tmp_path):
    spec = tier_spec_from_json({"kind": "field_levels", "levels": [0.0, 0.5, 1.0]})
    assert spec.mode == "field_levels"
    assert spec.n_tiers == 3
    assert spec.table.tier_of(2) == 2
    path = tmp_path / "tiers.json"
    path.write_text(json.dumps({"kind": "class_map", "class_to_tier": {"4": 2}, "default_tier": 0}))
    loaded = load_tier_spec(path)
    assert loaded.table.tier_of(4) == 2
    assert loaded.table.tier_of(99) == 0


def test_intra_tasks_respect_distance(small_world):
    manifest = small_world["manifest"]
    tasks = generate_pair_tasks(manifest, seed=55)
    for t in tasks:
        if t.kind == "intra":
            entry = manifest.entry(t.a.image_id)
            dist = math.hypot(t.a.x - t.b.x, t.a.y - t.b.y)
            assert dist >= 0.05 * min(entry.width, entry.height)
