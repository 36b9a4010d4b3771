import numpy as np
import pytest

from palletbench.errors import EmptyMaskError, EntityAbsentError
from palletbench.perception import (
    AUX_PREDICATES,
    LabeledPointCloud,
    SEM_BOX,
    SEM_FLOOR,
    aux_predicate_mask,
    freeform_putdown_point,
    gt_action_masks,
    mask_iou,
    mask_to_instance,
    synthesize_cloud,
)
from palletbench.world import Action, FreeCellTarget, StackTopTarget, SurfaceKind

from conftest import manual_scene
from test_world import place


def test_single_box_contributes_600_points():
    state = manual_scene(n_boxes=1, surface_kinds=())
    cloud = synthesize_cloud(state, resolution=0.05, seed=0)
    mask = cloud.instance_mask(("box", 0))
    # 6 faces x (0.5 / 0.05)^2 points
    assert int(mask.sum()) == 600


def test_empty_scene_floor_only():
    state = manual_scene(n_boxes=1, surface_kinds=())
    cloud = synthesize_cloud(state, resolution=0.1, seed=0)
    non_box = cloud.semantic != SEM_BOX
    assert set(np.unique(cloud.semantic[non_box])) == {SEM_FLOOR}


def test_cloud_deterministic_given_seed():
    state = manual_scene(n_boxes=3)
    a = synthesize_cloud(state, seed=9).to_bytes()
    b = synthesize_cloud(state, seed=9).to_bytes()
    assert a == b
    c = synthesize_cloud(state, seed=10).to_bytes()
    assert a != c


def test_minimum_point_guarantees_at_coarse_resolution():
    state = manual_scene(n_boxes=2)
    cloud = synthesize_cloud(state, resolution=0.15, seed=1)
    for b in (0, 1):
        assert cloud.instance_mask(("box", b)).sum() >= 50
    free_cell_refs = [ref for ref in cloud.instances if ref[0] == "cell"]
    assert free_cell_refs
    for ref in free_cell_refs:
        assert cloud.instance_mask(ref).sum() >= 20


def test_occupied_cells_have_no_deck_points():
    state = manual_scene(n_boxes=1)
    state = place(state, 0)
    cloud = synthesize_cloud(state, seed=0)
    assert cloud.instance_row(("cell", 0, 0, 0)) is None
    assert cloud.instance_row(("cell", 0, 1, 0)) is not None


def test_gt_masks_pick_popcount_and_cell_target():
    state = manual_scene(n_boxes=1)
    cloud = synthesize_cloud(state, seed=0)
    action = Action(0, FreeCellTarget(0, 0, 0))
    masks = gt_action_masks(cloud, action)
    assert int(masks.pick_mask.sum()) == 600
    target_ref, coverage = mask_to_instance(cloud, masks.target_mask)
    assert target_ref == ("cell", 0, 0, 0) and coverage == 1.0
    # the cell mask stays inside its own deck patch
    other = cloud.instance_mask(("cell", 0, 1, 0))
    assert not (masks.target_mask & other).any()


def test_gt_masks_stack_target_is_base_box():
    state = manual_scene(n_boxes=2)
    state = place(state, 0)
    cloud = synthesize_cloud(state, seed=0)
    masks = gt_action_masks(cloud, Action(1, StackTopTarget(base_box_id=0)))
    ref, coverage = mask_to_instance(cloud, masks.target_mask)
    assert ref == ("box", 0) and coverage == 1.0


def test_gt_masks_entity_absent():
    state = manual_scene(n_boxes=1)
    cloud = synthesize_cloud(state, seed=0)
    with pytest.raises(EntityAbsentError):
        gt_action_masks(cloud, Action(99, FreeCellTarget(0, 0, 0)))


def test_mask_to_instance_examples():
    state = manual_scene(n_boxes=2)
    cloud = synthesize_cloud(state, seed=0)
    box_mask = cloud.instance_mask(("box", 0))
    ref, cov = mask_to_instance(cloud, box_mask)
    assert ref == ("box", 0) and cov == 1.0
    # 80% of box 0 plus a sliver of box 1 still decodes to box 0
    idx0 = np.flatnonzero(box_mask)
    idx1 = np.flatnonzero(cloud.instance_mask(("box", 1)))
    mixed = np.zeros(len(cloud), dtype=bool)
    mixed[idx0[: int(0.8 * len(idx0))]] = True
    mixed[idx1[: int(0.1 * len(idx1))]] = True
    ref, cov = mask_to_instance(cloud, mixed)
    assert ref == ("box", 0) and cov == pytest.approx(0.8, abs=0.01)
    with pytest.raises(EmptyMaskError):
        mask_to_instance(cloud, np.zeros(len(cloud), dtype=bool))


def test_mask_iou_identities():
    a = np.array([True, True, False, False])
    b = np.array([True, False, True, False])
    assert mask_iou(a, a) == 1.0
    assert mask_iou(a, b) == pytest.approx(1 / 3)
    assert mask_iou(a, np.zeros(4, dtype=bool)) == 0.0
    with pytest.raises(EmptyMaskError):
        mask_iou(np.zeros(4, dtype=bool), np.zeros(4, dtype=bool))


def test_mask_iou_brute_force_random():
    rng = np.random.default_rng(3)
    for _ in range(30):
        a = rng.random(40) < 0.4
        b = rng.random(40) < 0.4
        if not (a | b).any():
            continue
        inter = sum(1 for x, y in zip(a, b) if x and y)
        union = sum(1 for x, y in zip(a, b) if x or y)
        assert mask_iou(a, b) == pytest.approx(inter / union)
        assert mask_iou(a, b) == mask_iou(b, a)


def test_freeform_point_square_symmetry():
    cloud = LabeledPointCloud(
        points=np.array([[0, 0, 1.0], [1, 0, 1.0], [0, 1, 1.0], [1, 1, 1.0]]),
        instance_index=np.zeros(4, dtype=np.int32),
        semantic=np.zeros(4, dtype=np.uint8),
        color_label=np.full(4, -1, dtype=np.int8),
        instances=(("floor",),),
        resolution=0.05,
    )
    mask = np.ones(4, dtype=bool)
    np.testing.assert_allclose(freeform_putdown_point(cloud, mask), [0.5, 0.5, 1.0])
    single = np.array([False, True, False, False])
    np.testing.assert_allclose(freeform_putdown_point(cloud, single), [1.0, 0.0, 1.0])
    with pytest.raises(EmptyMaskError):
        freeform_putdown_point(cloud, np.zeros(4, dtype=bool))


def test_freeform_point_of_cell_mask_near_center():
    state = manual_scene(n_boxes=1)
    cloud = synthesize_cloud(state, resolution=0.05, seed=4)
    cell = state.surface(0).cells[2]
    mask = cloud.instance_mask(("cell", 0, cell.cell_index, cell.layer))
    point = freeform_putdown_point(cloud, mask)
    assert abs(point[0] - cell.center[0]) < 0.05
    assert abs(point[1] - cell.center[1]) < 0.05
    assert point[2] == pytest.approx(cell.center[2], abs=1e-9)


def test_aux_predicate_masks_cover_expected_entities():
    from palletbench.world import apply_action

    state = manual_scene(n_boxes=3)
    state = place(state, 0)
    state = apply_action(state, Action(1, StackTopTarget(base_box_id=0)))
    cloud = synthesize_cloud(state, seed=0)
    placed = aux_predicate_mask(cloud, state, "placed-boxes")
    assert mask_to_instance(cloud, placed & cloud.instance_mask(("box", 0)))[0] == ("box", 0)
    unplaced = aux_predicate_mask(cloud, state, "unplaced-boxes")
    assert (unplaced == cloud.instance_mask(("box", 2))).all()
    stacked = aux_predicate_mask(cloud, state, "stacked-boxes")
    expected = cloud.instance_mask(("box", 0)) | cloud.instance_mask(("box", 1))
    assert (stacked == expected).all()
    accessible = aux_predicate_mask(cloud, state, "accessible-boxes")
    assert (accessible == (cloud.instance_mask(("box", 1)) | cloud.instance_mask(("box", 2)))).all()
    free = aux_predicate_mask(cloud, state, "free-cells")
    # the occupied column still has room: grounded at its top box
    assert (free & cloud.instance_mask(("box", 1))).any()
    assert (free & cloud.instance_mask(("cell", 0, 1, 0))).any()


def test_visibility_filter_drops_hidden_geometry():
    from palletbench.camera import camera_rig
    from palletbench.world import apply_action

    state = manual_scene(n_boxes=2)
    state = place(state, 0)
    state = apply_action(state, Action(1, StackTopTarget(base_box_id=0)))
    rig = camera_rig(count=6)
    full = synthesize_cloud(state, resolution=0.1, seed=1)
    filtered = synthesize_cloud(state, resolution=0.1, seed=1, visibility_rig=rig)
    assert len(filtered) < len(full)
    # the buried box keeps only side faces; its top and bottom are blocked
    buried_full = int(full.instance_mask(("box", 0)).sum())
    row = filtered.instance_row(("box", 0))
    buried_filtered = int((filtered.instance_index == row).sum()) if row is not None else 0
    assert buried_filtered < buried_full
    # the stack-top box keeps most of its points (still partially self-occluded)
    top_row = filtered.instance_row(("box", 1))
    assert top_row is not None


def test_cloud_bytes_round_trip():
    state = manual_scene(n_boxes=2, surface_kinds=(SurfaceKind.SHELF_LARGE,))
    cloud = synthesize_cloud(state, seed=2)
    blob = cloud.to_bytes()
    back = LabeledPointCloud.from_bytes(blob)
    assert back.to_bytes() == blob
    assert back.instances == cloud.instances
    assert len(back) == len(cloud)


def test_cloud_ndjson_debug_form():
    import json

    state = manual_scene(n_boxes=1, surface_kinds=())
    cloud = synthesize_cloud(state, resolution=0.25, seed=3)
    lines = cloud.to_ndjson().splitlines()
    header = json.loads(lines[0])
    assert header["count"] == len(cloud) == len(lines) - 1
    row = json.loads(lines[1])
    assert set(row) == {"x", "y", "z", "instance", "semantic", "color"}
