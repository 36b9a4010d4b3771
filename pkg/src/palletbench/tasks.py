"""The 11 rearrangement task variants.

Each variant constrains intermediate placement order and/or the final
configuration.  This module owns parameter sampling, the language templates
(shipped as a versioned JSON data file), the per-step referee
(``action_valid``), and terminal goal satisfaction.

For the three variants whose constraint can strand remaining boxes
(homogeneous stacks, box-type segregation, box accessibility) the referee
additionally requires that an action leave the goal completable; see
``*_feasible`` below.  Placing a box so the remaining boxes can no longer
be stored is treated as violating the final-configuration requirement.
"""

from __future__ import annotations

import functools
import importlib.resources
import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum

from .errors import ActionError
from .rng import make_rng
from .world import (
    Action,
    BoxItem,
    CellSlot,
    Color,
    COLOR_ORDER,
    FreeCellTarget,
    SceneState,
    StackTopTarget,
    resolve_putdown,
    unplaced_boxes,
)


class Variant(str, Enum):
    BASIC_PLACEMENT = "basic-placement"
    BOX_TYPE_PRIORITY = "box-type-priority"
    SHELF_PRIORITY = "shelf-priority"
    PALLET_PRIORITY = "pallet-priority"
    PLACEMENT_ORDERING = "placement-ordering"
    SIZE_PRIORITY = "size-priority"
    AVOID_STACKING = "avoid-stacking"
    HOMOGENEOUS_STACKS = "homogeneous-stacks"
    BOX_TYPE_SEGREGATION = "box-type-segregation"
    FINISH_STACK_FIRST = "finish-stack-first"
    BOX_ACCESSIBILITY = "box-accessibility"


ALL_VARIANTS = tuple(Variant)

DIRECTIONS = ("left-to-right", "right-to-left")
SIZES = ("small", "large")

_DIRECTION_TEXT = {"left-to-right": "left to right", "right-to-left": "right to left"}


@functools.lru_cache(maxsize=1)
def templates_data() -> dict:
    raw = importlib.resources.files(__package__).joinpath("data/templates.json").read_text("utf-8")
    return json.loads(raw)


def heldout_templates(variant: Variant) -> tuple[str, ...]:
    """The three evaluation-only templates, disjoint from training ones."""
    return tuple(templates_data()["variants"][variant.value]["heldout"])


def training_templates(variant: Variant) -> tuple[str, ...]:
    return tuple(templates_data()["variants"][variant.value]["train"])


@dataclass(frozen=True)
class TaskInstance:
    variant: Variant
    max_height: int
    goal_text: str
    template_id: int
    template_pool: str = "train"
    priority_color: Color | None = None
    direction: str | None = None
    priority_size: str | None = None

    def params(self) -> dict:
        out: dict = {"max_height": self.max_height}
        if self.priority_color is not None:
            out["priority_color"] = self.priority_color.value
        if self.direction is not None:
            out["direction"] = self.direction
        if self.priority_size is not None:
            out["priority_size"] = self.priority_size
        return out

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "max_height": self.max_height,
            "goal_text": self.goal_text,
            "template_id": self.template_id,
            "template_pool": self.template_pool,
            "priority_color": self.priority_color.value if self.priority_color else None,
            "direction": self.direction,
            "priority_size": self.priority_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskInstance":
        return cls(
            variant=Variant(d["variant"]),
            max_height=d["max_height"],
            goal_text=d["goal_text"],
            template_id=d["template_id"],
            template_pool=d.get("template_pool", "train"),
            priority_color=Color(d["priority_color"]) if d.get("priority_color") else None,
            direction=d.get("direction"),
            priority_size=d.get("priority_size"),
        )


def _needs_color(variant: Variant) -> bool:
    return variant in (Variant.BOX_TYPE_PRIORITY, Variant.BOX_ACCESSIBILITY)


def sample_task(variant: Variant, seed: int, pool: str = "train") -> TaskInstance:
    """Sample parameters and instantiate one of the 3 templates for ``pool``.

    Deterministic given (variant, seed, pool).  Draw order is fixed:
    max height, priority color, direction, priority size, template id.
    """
    if pool not in ("train", "heldout"):
        raise ValueError(f"unknown template pool {pool!r}")
    rng = make_rng(seed, "task", variant.value)
    max_height = int(rng.integers(1, 4))
    priority_color = COLOR_ORDER[int(rng.integers(0, 3))] if _needs_color(variant) else None
    direction = DIRECTIONS[int(rng.integers(0, 2))] if variant == Variant.PLACEMENT_ORDERING else None
    priority_size = SIZES[int(rng.integers(0, 2))] if variant == Variant.SIZE_PRIORITY else None
    template_id = int(rng.integers(0, 3))

    templates = templates_data()["variants"][variant.value][pool if pool == "train" else "heldout"]
    values = {"max_height": max_height}
    if priority_color is not None:
        values["priority_color"] = priority_color.value
    if direction is not None:
        values["direction"] = _DIRECTION_TEXT[direction]
    if priority_size is not None:
        values["priority_size"] = priority_size
    goal_text = templates[template_id].format(**values)
    return TaskInstance(
        variant=variant,
        max_height=max_height,
        goal_text=goal_text,
        template_id=template_id,
        template_pool=pool,
        priority_color=priority_color,
        direction=direction,
        priority_size=priority_size,
    )


# ---------------------------------------------------------------------------
# Episode-scoped constraint memory (finish-stack-first only)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstraintMemory:
    """Per-episode task memory: the most recently extended incomplete column."""

    active_column: tuple[int, int, int] | None = None  # (surface, cell, layer)

    def to_dict(self) -> dict:
        return {"active_column": list(self.active_column) if self.active_column else None}

    @classmethod
    def from_dict(cls, d: dict) -> "ConstraintMemory":
        ac = d.get("active_column")
        return cls(active_column=tuple(ac) if ac else None)


def advance_memory(
    memory: ConstraintMemory, task: TaskInstance, state_after: SceneState, action: Action
) -> ConstraintMemory:
    """Update the constraint memory after an executed action."""
    if task.variant != Variant.FINISH_STACK_FIRST:
        return memory
    box = state_after.box(action.pickup_id)
    if box.placement is None:
        return memory
    addr = box.placement.cell
    cell = state_after.cell(addr)
    eff = min(task.max_height, cell.max_stack)
    if 1 <= cell.height < eff:
        return ConstraintMemory(active_column=(addr.surface_id, addr.cell_index, addr.layer))
    return ConstraintMemory(active_column=None)


# ---------------------------------------------------------------------------
# Referee
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Validity:
    valid: bool
    violations: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.valid


@dataclass(frozen=True)
class SlotView:
    """A placement column as the referee sees it."""

    surface_id: int
    cell_index: int
    layer: int
    is_pallet: bool
    is_small: bool
    height: int
    eff_max: int
    column_colors: tuple[Color, ...]
    x: float
    y: float
    insertion: tuple[float, float, float]
    target: FreeCellTarget | StackTopTarget

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.surface_id, self.cell_index, self.layer)

    @property
    def is_open(self) -> bool:
        return self.height < self.eff_max


class TaskEvalContext:
    """Shared per-(task, state) aggregates for evaluating many candidate actions."""

    def __init__(self, task: TaskInstance, state: SceneState, memory: ConstraintMemory | None = None):
        self.task = task
        self.state = state
        self.memory = memory or ConstraintMemory()
        h = task.max_height
        box_size = state.config.box_size

        self.unplaced_colors: Counter = Counter()
        for b in state.boxes:
            if not b.is_placed:
                self.unplaced_colors[b.color] += 1

        self.slots: dict[tuple[int, int, int], SlotView] = {}
        self.free_pallet_cells = 0
        self.free_shelf_cells = 0
        self.pallet_cap = 0
        surface_colors: dict[int, set[Color]] = {}
        for s in state.surfaces:
            colors: set[Color] = set()
            for c in s.cells:
                eff = min(h, c.max_stack)
                col_colors = tuple(state.box(o).color for o in c.occupants)
                colors.update(col_colors)
                if s.kind.is_pallet:
                    self.pallet_cap = max(self.pallet_cap, eff)
                if not c.occupants:
                    if s.kind.is_pallet:
                        self.free_pallet_cells += 1
                    else:
                        self.free_shelf_cells += 1
                if c.occupants:
                    target: FreeCellTarget | StackTopTarget = StackTopTarget(base_box_id=c.occupants[-1])
                else:
                    target = FreeCellTarget(s.id, c.cell_index, c.layer)
                self.slots[(s.id, c.cell_index, c.layer)] = SlotView(
                    surface_id=s.id,
                    cell_index=c.cell_index,
                    layer=c.layer,
                    is_pallet=s.kind.is_pallet,
                    is_small=s.kind.is_small,
                    height=c.height,
                    eff_max=eff,
                    column_colors=col_colors,
                    x=c.center[0],
                    y=c.center[1],
                    insertion=c.insertion_center(box_size),
                    target=target,
                )
            surface_colors[s.id] = colors
        self.surface_colors = surface_colors
        self.open_slots = [v for v in self.slots.values() if v.is_open]

        # Variant-specific aggregates.
        self._frontier_key: tuple[int, int, int] | None = None
        if task.variant == Variant.PLACEMENT_ORDERING and self.open_slots:
            sign = 1.0 if task.direction == "left-to-right" else -1.0
            frontier = min(
                self.open_slots,
                key=lambda v: (round(sign * v.x, 6), round(v.y, 6), v.surface_id, v.cell_index, v.layer),
            )
            self._frontier_key = frontier.key

        self._open_priority_size = 0
        if task.variant == Variant.SIZE_PRIORITY:
            want_small = task.priority_size == "small"
            self._open_priority_size = sum(1 for v in self.open_slots if v.is_small == want_small)

        self._open_pallet_slots = 0
        if task.variant == Variant.PALLET_PRIORITY:
            self._open_pallet_slots = sum(1 for v in self.open_slots if v.is_pallet)

        if task.variant == Variant.HOMOGENEOUS_STACKS:
            self.homo_rooms: Counter = Counter()
            for v in self.slots.values():
                if v.height and v.is_open and len(set(v.column_colors)) == 1:
                    self.homo_rooms[v.column_colors[0]] += v.eff_max - v.height

        if task.variant == Variant.BOX_TYPE_SEGREGATION:
            self.seg_owned_free: Counter = Counter()
            self.seg_empty_caps: list[int] = []
            self._seg_surface_empty: dict[int, bool] = {}
            self._seg_surface_cap: dict[int, int] = {}
            for s in state.surfaces:
                cap = sum(min(h, c.max_stack) for c in s.cells)
                used = sum(c.height for c in s.cells)
                self._seg_surface_cap[s.id] = cap
                owners = surface_colors[s.id]
                self._seg_surface_empty[s.id] = not owners
                if not owners:
                    self.seg_empty_caps.append(cap)
                elif len(owners) == 1:
                    self.seg_owned_free[next(iter(owners))] += cap - used

        if task.variant == Variant.BOX_ACCESSIBILITY:
            p = task.priority_color
            self.acc_room_p_free = 0
            self.acc_room_all_p = 0
            for v in self.slots.values():
                if not v.height or not v.is_open:
                    continue
                room = v.eff_max - v.height
                if p not in v.column_colors:
                    self.acc_room_p_free += room
                elif all(c == p for c in v.column_colors):
                    self.acc_room_all_p += room

    # -- per-candidate checks -------------------------------------------------

    def rule_violation(self, color: Color, slot: SlotView) -> str | None:
        """Variant clause for placing a box of ``color`` into ``slot``."""
        task = self.task
        v = task.variant
        if v == Variant.BOX_TYPE_PRIORITY:
            pc = task.priority_color
            if color != pc and self.unplaced_colors.get(pc, 0) > 0:
                return v.value
        elif v == Variant.SHELF_PRIORITY:
            if slot.is_pallet and self.free_shelf_cells > 0:
                return v.value
        elif v == Variant.PALLET_PRIORITY:
            if not slot.is_pallet and self._open_pallet_slots > 0:
                return v.value
        elif v == Variant.PLACEMENT_ORDERING:
            if slot.key != self._frontier_key:
                return v.value
        elif v == Variant.SIZE_PRIORITY:
            want_small = task.priority_size == "small"
            if slot.is_small != want_small and self._open_priority_size > 0:
                return v.value
        elif v == Variant.AVOID_STACKING:
            if slot.height > 0 and (self.free_pallet_cells + self.free_shelf_cells) > 0:
                return v.value
        elif v == Variant.HOMOGENEOUS_STACKS:
            if slot.height > 0 and any(c != color for c in slot.column_colors):
                return v.value
        elif v == Variant.BOX_TYPE_SEGREGATION:
            owners = self.surface_colors[slot.surface_id]
            if owners and owners != {color}:
                return v.value
        elif v == Variant.FINISH_STACK_FIRST:
            active = self.memory.active_column
            if active is not None:
                active_slot = self.slots.get(active)
                if active_slot is not None and 1 <= active_slot.height < active_slot.eff_max:
                    if slot.key != active:
                        return v.value
        elif v == Variant.BOX_ACCESSIBILITY:
            p = task.priority_color
            column_after = slot.column_colors + (color,)
            for c in column_after[:-1]:
                if c == p and any(cc != p for cc in column_after):
                    return v.value
        return None

    def guard_violation(self, color: Color, slot: SlotView) -> str | None:
        """Completability guard; only binds under the three fragile variants."""
        v = self.task.variant
        if v == Variant.HOMOGENEOUS_STACKS:
            needs = dict(self.unplaced_colors)
            needs[color] = needs.get(color, 0) - 1
            rooms = dict(self.homo_rooms)
            fp, fs = self.free_pallet_cells, self.free_shelf_cells
            if slot.height:
                rooms[color] = rooms.get(color, 0) - 1
            else:
                if slot.is_pallet:
                    fp -= 1
                else:
                    fs -= 1
                rooms[color] = rooms.get(color, 0) + slot.eff_max - 1
            if not _multi_color_fits(needs, rooms, fp, fs, max(self.pallet_cap, 1)):
                return "feasibility"
        elif v == Variant.BOX_TYPE_SEGREGATION:
            needs = dict(self.unplaced_colors)
            needs[color] = needs.get(color, 0) - 1
            owned = dict(self.seg_owned_free)
            empty_caps = list(self.seg_empty_caps)
            if self._seg_surface_empty[slot.surface_id]:
                empty_caps.remove(self._seg_surface_cap[slot.surface_id])
                owned[color] = owned.get(color, 0) + self._seg_surface_cap[slot.surface_id] - 1
            else:
                owned[color] = owned.get(color, 0) - 1
            if not _segregation_fits(needs, owned, empty_caps):
                return "feasibility"
        elif v == Variant.BOX_ACCESSIBILITY:
            p = self.task.priority_color
            needs = dict(self.unplaced_colors)
            needs[color] = needs.get(color, 0) - 1
            need_p = needs.get(p, 0)
            need_n = sum(n for c, n in needs.items() if c != p)
            room_p_free = self.acc_room_p_free
            room_all_p = self.acc_room_all_p
            fp, fs = self.free_pallet_cells, self.free_shelf_cells
            new_room = slot.eff_max - slot.height - 1
            if slot.height == 0:
                if slot.is_pallet:
                    fp -= 1
                else:
                    fs -= 1
                if color == p:
                    room_all_p += new_room
                else:
                    room_p_free += new_room
            else:
                had_p = p in slot.column_colors
                all_p = had_p and all(c == p for c in slot.column_colors)
                old_room = slot.eff_max - slot.height
                if all_p:
                    room_all_p -= old_room
                    if color == p:
                        room_all_p += new_room
                elif not had_p:
                    room_p_free -= old_room
                    if color != p:
                        room_p_free += new_room
                    # a priority box atop a mixed column freezes that column
            if not _accessibility_fits(
                need_p, need_n, room_p_free, room_all_p, fp, fs, max(self.pallet_cap, 1)
            ):
                return "feasibility"
        return None


def _multi_color_fits(
    needs: dict[Color, int], rooms: dict[Color, int], free_pallet: int, free_shelf: int, pallet_cap: int
) -> bool:
    """Can every color's remaining boxes fit into own-color columns plus a
    split of the free cells?  Exact for <= 3 colors via DP over shelf budget."""
    deficits = []
    for color, n in needs.items():
        d = n - rooms.get(color, 0)
        if d > 0:
            deficits.append(d)
    if not deficits:
        return True
    # best[s] = min pallet cells needed using at most s shelf cells so far
    best = {0: 0}
    for d in deficits:
        nxt: dict[int, int] = {}
        for s_used, pallets in best.items():
            max_extra = min(d, free_shelf - s_used)
            for s in range(max_extra + 1):
                rem = d - s
                p = -(-rem // pallet_cap) if rem > 0 else 0
                key = s_used + s
                total = pallets + p
                if key not in nxt or nxt[key] > total:
                    nxt[key] = total
        best = nxt
        if not best:
            return False
    return min(best.values()) <= free_pallet


def _segregation_fits(needs: dict[Color, int], owned: dict[Color, int], empty_caps: list[int]) -> bool:
    """Can empty surfaces be assigned to colors so every deficit is covered?"""
    deficits = [max(0, n - owned.get(c, 0)) for c, n in needs.items() if n > 0]
    deficits = [d for d in deficits if d > 0]
    if not deficits:
        return True
    caps = sorted(empty_caps, reverse=True)

    def assign(i: int, remaining: tuple[int, ...]) -> bool:
        if not any(remaining):
            return True
        if i == len(caps) or sum(caps[i:]) < sum(remaining):
            return False
        for j, r in enumerate(remaining):
            if r > 0:
                nxt = list(remaining)
                nxt[j] = max(0, r - caps[i])
                if assign(i + 1, tuple(nxt)):
                    return True
        # also allow leaving this surface unused
        return assign(i + 1, remaining)

    return assign(0, tuple(deficits))


def _accessibility_fits(
    need_p: int,
    need_n: int,
    room_p_free: int,
    room_all_p: int,
    free_pallet: int,
    free_shelf: int,
    pallet_cap: int,
) -> bool:
    """Split free cells between priority and non-priority boxes."""
    deficit_p = max(0, need_p - room_all_p)
    for pallets_for_p in range(free_pallet + 1):
        shelf_for_p = max(0, deficit_p - pallets_for_p * pallet_cap)
        if shelf_for_p > free_shelf:
            continue
        cap_n = (
            room_p_free
            + (free_shelf - shelf_for_p)
            + (free_pallet - pallets_for_p) * pallet_cap
        )
        if need_n <= cap_n:
            return True
    return False


def _slot_view_for(ctx: TaskEvalContext, state: SceneState, cell: CellSlot) -> SlotView:
    return ctx.slots[(cell.surface_id, cell.cell_index, cell.layer)]


def action_valid(
    task: TaskInstance,
    state: SceneState,
    action: Action,
    memory: ConstraintMemory | None = None,
) -> Validity:
    """Referee verdict for one action; pure function of its inputs.

    Checks, in order: the pickup is an unplaced (hence accessible) box, the
    putdown slot structurally accepts a box, the column stays within the
    task height limit, the variant clause holds, and (for the fragile
    variants) the goal remains completable.
    """
    violations: list[str] = []
    if not state.has_box(action.pickup_id):
        return Validity(False, ("pickup-missing",))
    box = state.box(action.pickup_id)
    if box.is_placed:
        violations.append("pickup-not-unplaced")
    try:
        cell = resolve_putdown(state, action.putdown, pickup_id=action.pickup_id)
    except ActionError as e:
        violations.append(e.code)
        return Validity(False, tuple(violations))

    ctx = TaskEvalContext(task, state, memory)
    slot = _slot_view_for(ctx, state, cell)
    if not slot.is_open:
        violations.append("height-limit")
    if violations:
        return Validity(False, tuple(violations))

    rule = ctx.rule_violation(box.color, slot)
    if rule is not None:
        violations.append(rule)
    elif (guard := ctx.guard_violation(box.color, slot)) is not None:
        violations.append(guard)
    return Validity(not violations, tuple(violations))


# ---------------------------------------------------------------------------
# Goal satisfaction
# ---------------------------------------------------------------------------


def _column_effective_max(task: TaskInstance, cell: CellSlot) -> int:
    return min(task.max_height, cell.max_stack)


def goal_satisfied(task: TaskInstance, state: SceneState) -> bool:
    """True iff every box is placed and the variant's final clauses hold."""
    if unplaced_boxes(state):
        return False
    for c in state.iter_cells():
        if c.height > _column_effective_max(task, c):
            return False
    v = task.variant
    if v == Variant.SHELF_PRIORITY:
        pallet_used = any(
            c.height for s in state.surfaces if s.kind.is_pallet for c in s.cells
        )
        shelf_open = any(
            not c.occupants for s in state.surfaces if not s.kind.is_pallet for c in s.cells
        )
        if pallet_used and shelf_open:
            return False
    elif v == Variant.PALLET_PRIORITY:
        shelf_used = any(
            c.height for s in state.surfaces if not s.kind.is_pallet for c in s.cells
        )
        pallet_open = any(
            c.height < _column_effective_max(task, c)
            for s in state.surfaces
            if s.kind.is_pallet
            for c in s.cells
        )
        if shelf_used and pallet_open:
            return False
    elif v == Variant.SIZE_PRIORITY:
        want_small = task.priority_size == "small"
        other_used = any(
            c.height for s in state.surfaces if s.kind.is_small != want_small for c in s.cells
        )
        priority_open = any(
            c.height < _column_effective_max(task, c)
            for s in state.surfaces
            if s.kind.is_small == want_small
            for c in s.cells
        )
        if other_used and priority_open:
            return False
    elif v == Variant.AVOID_STACKING:
        any_stack = any(c.height >= 2 for c in state.iter_cells())
        any_empty = any(not c.occupants for c in state.iter_cells())
        if any_stack and any_empty:
            return False
    elif v == Variant.HOMOGENEOUS_STACKS:
        for c in state.iter_cells():
            colors = {state.box(o).color for o in c.occupants}
            if len(colors) > 1:
                return False
    elif v == Variant.BOX_TYPE_SEGREGATION:
        for s in state.surfaces:
            colors = {state.box(o).color for c in s.cells for o in c.occupants}
            if len(colors) > 1:
                return False
    elif v == Variant.FINISH_STACK_FIRST:
        incomplete = sum(
            1 for c in state.iter_cells() if 0 < c.height < _column_effective_max(task, c)
        )
        if incomplete > 1:
            return False
    elif v == Variant.BOX_ACCESSIBILITY:
        if not priority_boxes_accessible(task, state):
            return False
    return True


def priority_boxes_accessible(task: TaskInstance, state: SceneState) -> bool:
    """Every placed priority-color box is a column top or in an all-priority column."""
    p = task.priority_color
    for c in state.iter_cells():
        if not c.occupants:
            continue
        colors = [state.box(o).color for o in c.occupants]
        all_p = all(col == p for col in colors)
        for i, col in enumerate(colors[:-1]):
            if col == p and not all_p:
                return False
    return True


# ---------------------------------------------------------------------------
# Task-aware scene feasibility (used by the suite and dataset builders)
# ---------------------------------------------------------------------------


def capacity_under_height(task: TaskInstance, state: SceneState) -> int:
    return sum(_column_effective_max(task, c) for c in state.iter_cells())


def task_feasible(task: TaskInstance, state: SceneState) -> bool:
    """Can the task be completed from this (normally initial) state?"""
    remaining = len(unplaced_boxes(state))
    placed = sum(c.height for c in state.iter_cells())
    if capacity_under_height(task, state) - placed < remaining:
        return False
    ctx = TaskEvalContext(task, state)
    v = task.variant
    if v == Variant.HOMOGENEOUS_STACKS:
        return _multi_color_fits(
            dict(ctx.unplaced_colors),
            dict(ctx.homo_rooms),
            ctx.free_pallet_cells,
            ctx.free_shelf_cells,
            max(ctx.pallet_cap, 1),
        )
    if v == Variant.BOX_TYPE_SEGREGATION:
        return _segregation_fits(dict(ctx.unplaced_colors), dict(ctx.seg_owned_free), list(ctx.seg_empty_caps))
    if v == Variant.BOX_ACCESSIBILITY:
        p = task.priority_color
        need_p = ctx.unplaced_colors.get(p, 0)
        need_n = sum(n for c, n in ctx.unplaced_colors.items() if c != p)
        return _accessibility_fits(
            need_p,
            need_n,
            ctx.acc_room_p_free,
            ctx.acc_room_all_p,
            ctx.free_pallet_cells,
            ctx.free_shelf_cells,
            max(ctx.pallet_cap, 1),
        )
    return True
