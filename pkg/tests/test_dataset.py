import json

import pytest

from palletbench.dataset import (
    AUX_INSTRUCTIONS,
    GROUNDING_SUFFIX,
    DatasetConfig,
    Paraphraser,
    apply_paraphrase_hook,
    emit_dataset,
    load_dataset,
)
from palletbench.encoding import rle_to_mask
from palletbench.errors import CorruptSampleError, SchemaMismatchError
from palletbench.perception import mask_to_instance
from palletbench.tasks import Variant
from palletbench.world import Action


def small_config(**overrides):
    base = dict(
        episodes=4,
        seed=5,
        resolution=0.2,
        variants=(Variant.BASIC_PLACEMENT, Variant.AVOID_STACKING),
        min_boxes=2,
        max_boxes=4,
        num_distractors_max=0,
    )
    base.update(overrides)
    return DatasetConfig(**base)


@pytest.fixture(scope="module")
def emitted(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    manifest = emit_dataset(small_config(), out)
    return out, manifest


def test_counts_match_rollout_structure(emitted):
    out, manifest = emitted
    counts = manifest["counts"]
    assert counts["terminal"] == 4
    # one action sample per oracle step; every box placed exactly once
    n_boxes_total = sum(ep["n_boxes"] for ep in manifest["episodes"])
    assert counts["action"] == n_boxes_total
    assert counts["total"] == sum(
        counts[k] for k in ("action", "auxiliary", "terminal", "paraphrase")
    )


def test_manifest_counts_equal_files_on_disk(emitted):
    out, manifest = emitted
    ds = load_dataset(out)
    assert ds.sample_count() == manifest["counts"]["total"]
    on_disk = sum(1 for _ in (out / "episodes").glob("ep-*/samples.ndjson"))
    assert on_disk == len(manifest["episodes"])


def test_goal_text_has_grounding_suffix(emitted):
    out, _ = emitted
    ds = load_dataset(out)
    for sample in ds.samples():
        assert sample["goal_text"].endswith(GROUNDING_SUFFIX)


def test_split_disjoint_by_scene(emitted):
    _, manifest = emitted
    train = set(manifest["splits"]["train"])
    test = set(manifest["splits"]["test"])
    assert train & test == set()
    assert train | test == {ep["id"] for ep in manifest["episodes"]}


def test_default_split_fraction_near_paper_ratio():
    # 2.2K held out of 9.5K total
    assert abs(DatasetConfig(episodes=1, seed=0).test_fraction - 2.2 / 9.5) < 0.01


def test_action_masks_round_trip_to_action(emitted):
    out, _ = emitted
    ds = load_dataset(out)
    checked = 0
    for sample in ds.samples():
        if sample["kind"] != "action":
            continue
        cloud = ds.load_cloud(sample)
        pick = rle_to_mask(sample["pick_mask_rle"], sample["point_count"])
        target = rle_to_mask(sample["target_mask_rle"], sample["point_count"])
        action = Action.from_dict(sample["action"])
        pick_ref, _ = mask_to_instance(cloud, pick)
        assert pick_ref == ("box", action.pickup_id)
        target_ref, _ = mask_to_instance(cloud, target)
        if target_ref[0] == "cell":
            assert sample["action"]["putdown"]["kind"] == "free-cell"
            assert target_ref[1:] == (
                action.putdown.surface_id,
                action.putdown.cell_index,
                action.putdown.layer,
            )
        else:
            assert target_ref == ("box", action.putdown.base_box_id)
        checked += 1
    assert checked > 0


def test_emit_bit_identical_across_runs(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    emit_dataset(small_config(episodes=2), a)
    emit_dataset(small_config(episodes=2), b)
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_loader_rejects_tampered_sample(tmp_path):
    out = tmp_path / "ds"
    emit_dataset(small_config(episodes=2), out)
    victim = next(iter((out / "episodes").glob("ep-*/samples.ndjson")))
    victim.write_text(victim.read_text().replace('"goal_text"', '"goal_tixt"', 1))
    with pytest.raises(CorruptSampleError):
        load_dataset(out)


def test_loader_rejects_unknown_schema(tmp_path):
    out = tmp_path / "ds"
    emit_dataset(small_config(episodes=1), out)
    manifest = json.loads((out / "manifest.json").read_text())
    manifest["schema_version"] = "99"
    (out / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(SchemaMismatchError):
        load_dataset(out)


def test_aux_samples_use_fixed_instructions(emitted):
    out, _ = emitted
    ds = load_dataset(out)
    for sample in ds.samples():
        if sample["kind"] == "auxiliary":
            base = sample["goal_text"][: -len(" " + GROUNDING_SUFFIX)]
            assert base == AUX_INSTRUCTIONS[sample["predicate"]]


def test_terminal_samples_signal_done(emitted):
    out, _ = emitted
    ds = load_dataset(out)
    for sample in ds.samples():
        expected = 1.0 if sample["kind"] == "terminal" else 0.0
        assert sample["done_probability"] == expected


# ---------------------------------------------------------------------------
# Paraphrase hook
# ---------------------------------------------------------------------------


class FakeProvider(Paraphraser):
    def __init__(self, variants):
        self.variants = variants

    def expand(self, text):
        return self.variants


def _sample():
    return {
        "sample_id": "ep-0-s0-action",
        "goal_text": f"Stack the boxes. {GROUNDING_SUFFIX}",
        "pick_mask_rle": [0, 3],
    }


def test_paraphrase_without_provider_flags_passthrough():
    s = _sample()
    extra = apply_paraphrase_hook(s, None)
    assert extra == []
    assert s["paraphrase_status"] == "no-provider"


def test_paraphrase_variants_share_masks():
    s = _sample()
    extra = apply_paraphrase_hook(s, FakeProvider(["Pile them up.", "Arrange the boxes."]))
    assert len(extra) == 2
    for copy in extra:
        assert copy["goal_text"].endswith(GROUNDING_SUFFIX)
        assert copy["pick_mask_rle"] == s["pick_mask_rle"]
        assert copy["paraphrase_of"] == s["sample_id"]


def test_paraphrase_caps_at_three():
    extra = apply_paraphrase_hook(_sample(), FakeProvider(["a", "b", "c", "d"]))
    assert len(extra) == 3


def test_paraphrase_rejects_empty_text():
    s = _sample()
    extra = apply_paraphrase_hook(s, FakeProvider(["", "ok variant"]))
    assert len(extra) == 1
    assert s["paraphrase_status"] == "provider-rejected"


def test_paraphrase_provider_failure_keeps_sample():
    class Exploding(Paraphraser):
        def expand(self, text):
            raise RuntimeError("boom")

    s = _sample()
    assert apply_paraphrase_hook(s, Exploding()) == []
    assert s["paraphrase_status"] == "provider-failure"


def test_subprocess_paraphraser_round_trip(tmp_path):
    import sys

    from palletbench.dataset import SubprocessParaphraser

    script = tmp_path / "provider.py"
    script.write_text(
        "import json, sys\n"
        "for line in sys.stdin:\n"
        "    req = json.loads(line)\n"
        "    out = {'variants': [req['text'].upper(), 'Rephrased: ' + req['text']]}\n"
        "    print(json.dumps(out), flush=True)\n"
    )
    provider = SubprocessParaphraser(f"{sys.executable} {script}")
    try:
        s = _sample()
        extra = apply_paraphrase_hook(s, provider)
        assert len(extra) == 2
        assert extra[0]["goal_text"].startswith("STACK THE BOXES.")
    finally:
        provider.close()
