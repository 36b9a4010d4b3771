import pytest

from palletbench.harness import build_task_scene
from palletbench.tasks import (
    ALL_VARIANTS,
    ConstraintMemory,
    TaskInstance,
    Variant,
    action_valid,
    advance_memory,
    goal_satisfied,
    heldout_templates,
    sample_task,
    task_feasible,
    training_templates,
)
from palletbench.world import (
    Action,
    Color,
    FreeCellTarget,
    StackTopTarget,
    SurfaceKind,
    apply_action,
    free_cells,
    unplaced_boxes,
)

from conftest import manual_scene
from test_world import place


def task_for(variant, max_height=3, color=None, direction=None, size=None):
    return TaskInstance(
        variant=variant,
        max_height=max_height,
        goal_text="test goal",
        template_id=0,
        priority_color=color,
        direction=direction,
        priority_size=size,
    )


# ---------------------------------------------------------------------------
# Sampling and templates
# ---------------------------------------------------------------------------


def test_sample_task_deterministic():
    a = sample_task(Variant.BASIC_PLACEMENT, 5)
    b = sample_task(Variant.BASIC_PLACEMENT, 5)
    assert a == b


def test_sampled_params_in_domain_and_mentioned_in_text():
    for variant in ALL_VARIANTS:
        for seed in range(12):
            task = sample_task(variant, seed)
            assert task.max_height in (1, 2, 3)
            assert str(task.max_height) in task.goal_text
            if variant in (Variant.BOX_TYPE_PRIORITY, Variant.BOX_ACCESSIBILITY):
                assert task.priority_color is not None
                assert task.priority_color.value in task.goal_text
            if variant == Variant.PLACEMENT_ORDERING:
                assert task.direction in ("left-to-right", "right-to-left")
                assert task.direction.replace("-", " ") in task.goal_text
            if variant == Variant.SIZE_PRIORITY:
                assert task.priority_size in ("small", "large")
                assert task.priority_size in task.goal_text


def test_heldout_templates_disjoint_and_three_per_variant():
    for variant in ALL_VARIANTS:
        train = set(training_templates(variant))
        held = set(heldout_templates(variant))
        assert len(held) == 3
        assert len(train) == 3
        assert train & held == set()


def test_heldout_pool_instantiates_same_params():
    task = sample_task(Variant.SIZE_PRIORITY, 4, pool="heldout")
    assert task.template_pool == "heldout"
    assert task.priority_size in task.goal_text


def test_box_color_priority_sampling_uniformish():
    colors = {sample_task(Variant.BOX_TYPE_PRIORITY, s).priority_color for s in range(30)}
    assert colors == {Color.RED, Color.BLUE, Color.YELLOW}


# ---------------------------------------------------------------------------
# action_valid per variant
# ---------------------------------------------------------------------------


def test_basic_placement_anything_goes_under_height():
    state = manual_scene(n_boxes=1)
    task = task_for(Variant.BASIC_PLACEMENT, max_height=3)
    verdict = action_valid(task, state, Action(0, FreeCellTarget(0, 0, 0)))
    assert verdict.valid and verdict.violations == ()


def test_height_limit_violation():
    state = manual_scene(n_boxes=2)
    state = place(state, 0)
    task = task_for(Variant.BASIC_PLACEMENT, max_height=1)
    verdict = action_valid(task, state, Action(1, StackTopTarget(base_box_id=0)))
    assert not verdict.valid and "height-limit" in verdict.violations


def test_pickup_must_be_unplaced():
    state = manual_scene(n_boxes=2)
    state = place(state, 0)
    task = task_for(Variant.BASIC_PLACEMENT)
    verdict = action_valid(task, state, Action(0, FreeCellTarget(0, 1, 0)))
    assert not verdict.valid and "pickup-not-unplaced" in verdict.violations


def test_box_type_priority_rule():
    state = manual_scene(n_boxes=2, colors=(Color.BLUE, Color.RED))
    task = task_for(Variant.BOX_TYPE_PRIORITY, color=Color.BLUE)
    bad = action_valid(task, state, Action(1, FreeCellTarget(0, 0, 0)))
    assert not bad.valid and "box-type-priority" in bad.violations
    good = action_valid(task, state, Action(0, FreeCellTarget(0, 0, 0)))
    assert good.valid
    # once no blue remains, red is allowed
    state2 = place(state, 0)
    assert action_valid(task, state2, Action(1, FreeCellTarget(0, 1, 0))).valid


def test_shelf_priority_rule():
    state = manual_scene(n_boxes=1, surface_kinds=(SurfaceKind.PALLET_SMALL, SurfaceKind.SHELF_SMALL))
    task = task_for(Variant.SHELF_PRIORITY)
    pallet_put = action_valid(task, state, Action(0, FreeCellTarget(0, 0, 0)))
    assert not pallet_put.valid and "shelf-priority" in pallet_put.violations
    shelf_put = action_valid(task, state, Action(0, FreeCellTarget(1, 0, 0)))
    assert shelf_put.valid


def test_shelf_priority_allows_pallet_when_shelves_full():
    state = manual_scene(n_boxes=5, surface_kinds=(SurfaceKind.PALLET_SMALL, SurfaceKind.SHELF_SMALL))
    task = task_for(Variant.SHELF_PRIORITY)
    for i, (cell, layer) in enumerate([(0, 0), (1, 0), (0, 1), (1, 1)]):
        state = place(state, i, surface_id=1, cell=cell, layer=layer)
    verdict = action_valid(task, state, Action(4, FreeCellTarget(0, 0, 0)))
    assert verdict.valid


def test_pallet_priority_rule():
    state = manual_scene(n_boxes=1, surface_kinds=(SurfaceKind.PALLET_SMALL, SurfaceKind.SHELF_SMALL))
    task = task_for(Variant.PALLET_PRIORITY)
    shelf_put = action_valid(task, state, Action(0, FreeCellTarget(1, 0, 0)))
    assert not shelf_put.valid and "pallet-priority" in shelf_put.violations
    assert action_valid(task, state, Action(0, FreeCellTarget(0, 0, 0))).valid


def test_placement_ordering_frontier():
    state = manual_scene(n_boxes=2, surface_kinds=(SurfaceKind.PALLET_SMALL,))
    task = task_for(Variant.PLACEMENT_ORDERING, direction="left-to-right")
    cells = sorted(state.surface(0).cells, key=lambda c: (round(c.center[0], 6), round(c.center[1], 6)))
    frontier = cells[0]
    other = cells[-1]
    ok = action_valid(task, state, Action(0, FreeCellTarget(0, frontier.cell_index, 0)))
    assert ok.valid
    bad = action_valid(task, state, Action(0, FreeCellTarget(0, other.cell_index, 0)))
    assert not bad.valid and "placement-ordering" in bad.violations
    # right-to-left flips the frontier (ties still break by ascending y)
    task_rl = task_for(Variant.PLACEMENT_ORDERING, direction="right-to-left")
    rl_frontier = min(state.surface(0).cells, key=lambda c: (-round(c.center[0], 6), round(c.center[1], 6)))
    assert action_valid(task_rl, state, Action(0, FreeCellTarget(0, rl_frontier.cell_index, 0))).valid


def test_size_priority_rule():
    state = manual_scene(n_boxes=1, surface_kinds=(SurfaceKind.PALLET_SMALL, SurfaceKind.PALLET_LARGE))
    task = task_for(Variant.SIZE_PRIORITY, size="large")
    small_put = action_valid(task, state, Action(0, FreeCellTarget(0, 0, 0)))
    assert not small_put.valid and "size-priority" in small_put.violations
    assert action_valid(task, state, Action(0, FreeCellTarget(1, 0, 0))).valid


def test_avoid_stacking_rule():
    state = manual_scene(n_boxes=5)
    task = task_for(Variant.AVOID_STACKING)
    for i in range(3):
        state = place(state, i, cell=i)
    stack_move = action_valid(task, state, Action(3, StackTopTarget(base_box_id=0)))
    assert not stack_move.valid and "avoid-stacking" in stack_move.violations
    floor_move = action_valid(task, state, Action(3, FreeCellTarget(0, 3, 0)))
    assert floor_move.valid
    # all level-0 cells taken: stacking becomes legal
    state = place(state, 3, cell=3)
    assert action_valid(task, state, Action(4, StackTopTarget(base_box_id=0))).valid


def test_homogeneous_stacks_rule():
    state = manual_scene(n_boxes=3, colors=(Color.RED, Color.BLUE, Color.RED))
    task = task_for(Variant.HOMOGENEOUS_STACKS)
    state = place(state, 0)
    mixed = action_valid(task, state, Action(1, StackTopTarget(base_box_id=0)))
    assert not mixed.valid and "homogeneous-stacks" in mixed.violations
    same = action_valid(task, state, Action(2, StackTopTarget(base_box_id=0)))
    assert same.valid


def test_box_type_segregation_rule():
    state = manual_scene(
        n_boxes=2,
        colors=(Color.RED, Color.BLUE),
        surface_kinds=(SurfaceKind.PALLET_SMALL, SurfaceKind.PALLET_SMALL),
    )
    task = task_for(Variant.BOX_TYPE_SEGREGATION)
    state = place(state, 0, surface_id=0)
    mixed_surface = action_valid(task, state, Action(1, FreeCellTarget(0, 1, 0)))
    assert not mixed_surface.valid and "box-type-segregation" in mixed_surface.violations
    own_surface = action_valid(task, state, Action(1, FreeCellTarget(1, 0, 0)))
    assert own_surface.valid


def test_finish_stack_first_rule():
    state = manual_scene(n_boxes=3)
    task = task_for(Variant.FINISH_STACK_FIRST, max_height=2)
    memory = ConstraintMemory()
    action0 = Action(0, FreeCellTarget(0, 0, 0))
    assert action_valid(task, state, action0, memory).valid
    state = apply_action(state, action0)
    memory = advance_memory(memory, task, state, action0)
    assert memory.active_column == (0, 0, 0)
    # a new cell is off-limits while the column is incomplete
    new_cell = action_valid(task, state, Action(1, FreeCellTarget(0, 1, 0)), memory)
    assert not new_cell.valid and "finish-stack-first" in new_cell.violations
    extend = Action(1, StackTopTarget(base_box_id=0))
    assert action_valid(task, state, extend, memory).valid
    state = apply_action(state, extend)
    memory = advance_memory(memory, task, state, extend)
    assert memory.active_column is None  # complete at H=2
    assert action_valid(task, state, Action(2, FreeCellTarget(0, 1, 0)), memory).valid


def test_box_accessibility_rule():
    state = manual_scene(n_boxes=3, colors=(Color.YELLOW, Color.RED, Color.YELLOW))
    task = task_for(Variant.BOX_ACCESSIBILITY, color=Color.YELLOW)
    state = place(state, 0)
    bury = action_valid(task, state, Action(1, StackTopTarget(base_box_id=0)))
    assert not bury.valid and "box-accessibility" in bury.violations
    all_priority = action_valid(task, state, Action(2, StackTopTarget(base_box_id=0)))
    assert all_priority.valid
    # placing priority on top of a non-priority box is fine
    state2 = manual_scene(n_boxes=2, colors=(Color.RED, Color.YELLOW))
    state2 = place(state2, 0)
    assert action_valid(task, state2, Action(1, StackTopTarget(base_box_id=0))).valid


def test_action_valid_is_pure():
    state = manual_scene(n_boxes=2)
    task = task_for(Variant.AVOID_STACKING)
    action = Action(0, FreeCellTarget(0, 0, 0))
    first = action_valid(task, state, action)
    second = action_valid(task, state, action)
    assert first == second


# ---------------------------------------------------------------------------
# goal_satisfied
# ---------------------------------------------------------------------------


def test_goal_satisfied_examples():
    state = manual_scene(n_boxes=2)
    task = task_for(Variant.BASIC_PLACEMENT, max_height=3)
    assert not goal_satisfied(task, state)  # boxes still on the floor
    state = place(state, 0, cell=0)
    state = place(state, 1, cell=1)
    assert goal_satisfied(task, state)


def test_goal_accessibility_buried_priority_fails():
    state = manual_scene(n_boxes=2, colors=(Color.YELLOW, Color.RED))
    task = task_for(Variant.BOX_ACCESSIBILITY, color=Color.YELLOW)
    state = place(state, 0)
    state = apply_action(state, Action(1, StackTopTarget(base_box_id=0)))
    assert not goal_satisfied(task, state)


def test_goal_segregation_mixed_surface_fails():
    state = manual_scene(n_boxes=2, colors=(Color.RED, Color.BLUE))
    task = task_for(Variant.BOX_TYPE_SEGREGATION)
    state = place(state, 0, cell=0)
    state = place(state, 1, cell=1)
    assert not goal_satisfied(task, state)


def test_goal_implies_final_clauses_on_valid_rollouts():
    from palletbench.oracle import oracle_rollout

    for i, variant in enumerate(ALL_VARIANTS):
        task = sample_task(variant, 100 + i)
        _, scene = build_task_scene(task, 5, 200 + i)
        rollout = oracle_rollout(task, scene)
        assert goal_satisfied(task, rollout.final_state)


# ---------------------------------------------------------------------------
# No dead ends: exhaustive over reachable states on small scenes
# ---------------------------------------------------------------------------


def _enumerate_valid_actions(task, state, memory):
    actions = []
    for b in sorted(unplaced_boxes(state)):
        for c in state.iter_cells():
            if c.occupants:
                target = StackTopTarget(base_box_id=c.occupants[-1])
            else:
                target = FreeCellTarget(c.surface_id, c.cell_index, c.layer)
            action = Action(b, target)
            if action_valid(task, state, action, memory).valid:
                actions.append(action)
    return actions


@pytest.mark.parametrize("variant", ALL_VARIANTS)
def test_no_dead_ends_exhaustive_small_scenes(variant):
    for seed in range(2):
        task = sample_task(variant, seed)
        n_boxes = 4 + seed
        _, scene = build_task_scene(task, n_boxes, 50 + seed)
        seen = set()
        frontier = [(scene, ConstraintMemory())]
        while frontier:
            state, memory = frontier.pop()
            key = (
                tuple(sorted((c.surface_id, c.cell_index, c.layer, c.occupants) for c in state.iter_cells())),
                memory.active_column,
            )
            if key in seen:
                continue
            seen.add(key)
            if goal_satisfied(task, state):
                continue
            actions = _enumerate_valid_actions(task, state, memory)
            assert actions, f"dead end for {variant.value} seed {seed}"
            for action in actions:
                nxt = apply_action(state, action)
                frontier.append((nxt, advance_memory(memory, task, nxt, action)))


def test_task_feasible_on_built_scenes():
    for variant in ALL_VARIANTS:
        task = sample_task(variant, 9)
        _, scene = build_task_scene(task, 8, 77)
        assert task_feasible(task, scene)
