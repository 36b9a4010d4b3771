"""Greedy-valid reference planner used for supervision and as the referee anchor.

At each step every (accessible unplaced box, open slot) pair is checked
against the task referee and the valid pair with the smallest
pickup-to-putdown distance wins; ties break lexicographically on
(pickup id, surface id, cell index, layer) so datasets are reproducible.
Distance runs from the pickup box centroid to the insertion point
(cell center at the target stack level).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DeadEndError
from .tasks import ConstraintMemory, TaskEvalContext, TaskInstance, advance_memory, goal_satisfied
from .world import Action, ExecutionMode, SceneState, apply_action


@dataclass(frozen=True)
class OracleChoice:
    action: Action
    distance: float
    candidate_count: int


@dataclass(frozen=True)
class OracleStep:
    state: SceneState
    choice: OracleChoice
    memory: ConstraintMemory


@dataclass(frozen=True)
class OracleRollout:
    task: TaskInstance
    steps: tuple[OracleStep, ...]
    final_state: SceneState


def oracle_next(
    task: TaskInstance, state: SceneState, memory: ConstraintMemory | None = None
) -> OracleChoice | None:
    """Next ground-truth action, or None when the goal is already satisfied.

    Equivalent to brute-force minimization of distance over all pairs that
    ``action_valid`` accepts; the variant clause depends only on the pickup
    color and the slot, which keeps the scan linear in boxes + slots.
    """
    if goal_satisfied(task, state):
        return None
    ctx = TaskEvalContext(task, state, memory)

    allowed_by_color: dict = {}
    for color in ctx.unplaced_colors:
        allowed = []
        for slot in ctx.open_slots:
            if ctx.rule_violation(color, slot) is not None:
                continue
            if ctx.guard_violation(color, slot) is not None:
                continue
            allowed.append(slot)
        allowed_by_color[color] = allowed

    best_key: tuple | None = None
    best: OracleChoice | None = None
    candidates = 0
    for box in state.boxes:
        if box.is_placed:
            continue
        for slot in allowed_by_color.get(box.color, ()):
            candidates += 1
            ix, iy, iz = slot.insertion
            d = math.sqrt(
                (box.pose.x - ix) ** 2 + (box.pose.y - iy) ** 2 + (box.pose.z - iz) ** 2
            )
            key = (round(d, 9), box.id, slot.surface_id, slot.cell_index, slot.layer)
            if best_key is None or key < best_key:
                best_key = key
                best = OracleChoice(
                    action=Action(pickup_id=box.id, putdown=slot.target),
                    distance=d,
                    candidate_count=0,
                )
    if best is None:
        raise DeadEndError(f"no valid action for {task.variant.value} with goal unsatisfied")
    return OracleChoice(action=best.action, distance=best.distance, candidate_count=candidates)


def oracle_rollout(task: TaskInstance, scene: SceneState) -> OracleRollout:
    """Run the oracle to completion under snap-to-target execution."""
    state = scene
    memory = ConstraintMemory()
    steps: list[OracleStep] = []
    limit = len(scene.boxes) + 1
    for _ in range(limit):
        choice = oracle_next(task, state, memory)
        if choice is None:
            return OracleRollout(task=task, steps=tuple(steps), final_state=state)
        steps.append(OracleStep(state=state, choice=choice, memory=memory))
        state = apply_action(state, choice.action, ExecutionMode.SNAP)
        memory = advance_memory(memory, task, state, choice.action)
    raise DeadEndError("rollout exceeded the one-placement-per-box bound")
