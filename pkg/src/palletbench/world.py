"""Ground-truth warehouse world: boxes, surfaces, placement cells, actions.

Scene states are immutable values; executing an action returns a new state.
All placed geometry is deterministic: a box placed at cell ``(s, c, l)`` on
stack level ``v`` sits at the cell center with
``z = deck_z + (v + 0.5) * box_height`` and yaw equal to the surface yaw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Iterator, Union

from .encoding import SCHEMA_VERSION, canonical_digest
from .errors import ActionError


class Color(str, Enum):
    RED = "red"
    BLUE = "blue"
    YELLOW = "yellow"


COLOR_ORDER = (Color.RED, Color.BLUE, Color.YELLOW)


class SurfaceKind(str, Enum):
    PALLET_SMALL = "pallet-small"
    PALLET_LARGE = "pallet-large"
    SHELF_SMALL = "shelf-small"
    SHELF_LARGE = "shelf-large"

    @property
    def is_pallet(self) -> bool:
        return self in (SurfaceKind.PALLET_SMALL, SurfaceKind.PALLET_LARGE)

    @property
    def is_small(self) -> bool:
        return self in (SurfaceKind.PALLET_SMALL, SurfaceKind.SHELF_SMALL)


class DistractorKind(str, Enum):
    BARREL_A = "barrel-a"
    BARREL_B = "barrel-b"
    BARREL_C = "barrel-c"
    BARREL_D = "barrel-d"
    BARREL_E = "barrel-e"
    TRAFFIC_CONE = "traffic-cone"


# Bounding half-extents (hx, hy, hz) used for clouds and depth rendering.
DISTRACTOR_HALF_EXTENTS = {
    DistractorKind.BARREL_A: (0.30, 0.30, 0.45),
    DistractorKind.BARREL_B: (0.28, 0.28, 0.40),
    DistractorKind.BARREL_C: (0.32, 0.32, 0.50),
    DistractorKind.BARREL_D: (0.25, 0.25, 0.35),
    DistractorKind.BARREL_E: (0.30, 0.30, 0.30),
    DistractorKind.TRAFFIC_CONE: (0.20, 0.20, 0.35),
}


class ExecutionMode(str, Enum):
    SNAP = "snap-to-target"
    FREEFORM = "free-form"


@dataclass(frozen=True)
class WorldConfig:
    """Physical dimensions; defaults pack cell grids with 0.05 m margins."""

    box_size: float = 0.5
    cell_pitch: float = 0.55
    pallet_deck_height: float = 0.15
    shelf_layer_heights: tuple[float, ...] = (0.10, 0.80)
    shelf_depth: float = 0.60
    floor_extent: float = 12.0
    max_pallet_stack: int = 3
    snap_tolerance_ratio: float = 0.5  # fraction of cell_pitch, per axis

    @property
    def snap_tolerance(self) -> float:
        return self.snap_tolerance_ratio * self.cell_pitch

    def to_dict(self) -> dict:
        return {
            "box_size": self.box_size,
            "cell_pitch": self.cell_pitch,
            "pallet_deck_height": self.pallet_deck_height,
            "shelf_layer_heights": list(self.shelf_layer_heights),
            "shelf_depth": self.shelf_depth,
            "floor_extent": self.floor_extent,
            "max_pallet_stack": self.max_pallet_stack,
            "snap_tolerance_ratio": self.snap_tolerance_ratio,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorldConfig":
        d = dict(d)
        d["shelf_layer_heights"] = tuple(d["shelf_layer_heights"])
        return cls(**d)


@dataclass(frozen=True)
class SurfaceSpec:
    rows: int  # cells across the short axis (local y)
    cols: int  # cells along the long axis (local x)
    layers: int
    max_stack: int


def surface_spec(kind: SurfaceKind, config: WorldConfig) -> SurfaceSpec:
    if kind == SurfaceKind.PALLET_SMALL:
        return SurfaceSpec(rows=2, cols=2, layers=1, max_stack=config.max_pallet_stack)
    if kind == SurfaceKind.PALLET_LARGE:
        return SurfaceSpec(rows=2, cols=3, layers=1, max_stack=config.max_pallet_stack)
    if kind == SurfaceKind.SHELF_SMALL:
        return SurfaceSpec(rows=1, cols=2, layers=2, max_stack=1)
    return SurfaceSpec(rows=1, cols=3, layers=2, max_stack=1)


def surface_half_extents(kind: SurfaceKind, config: WorldConfig) -> tuple[float, float]:
    """Unrotated footprint half extents (local x, local y)."""
    spec = surface_spec(kind, config)
    hx = spec.cols * config.cell_pitch / 2.0
    if kind.is_pallet:
        hy = spec.rows * config.cell_pitch / 2.0
    else:
        hy = config.shelf_depth / 2.0
    return hx, hy


def surface_capacity(kind: SurfaceKind, config: WorldConfig) -> int:
    """Box capacity assuming full stacking (pallets x3, shelves x1)."""
    spec = surface_spec(kind, config)
    return spec.rows * spec.cols * spec.layers * spec.max_stack


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float
    yaw: float

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "z": self.z, "yaw": self.yaw}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        return cls(d["x"], d["y"], d["z"], d["yaw"])


@dataclass(frozen=True)
class CellAddress:
    surface_id: int
    cell_index: int
    layer: int

    def to_list(self) -> list[int]:
        return [self.surface_id, self.cell_index, self.layer]


@dataclass(frozen=True)
class BoxPlacement:
    surface_id: int
    cell_index: int
    layer: int
    level: int

    @property
    def cell(self) -> CellAddress:
        return CellAddress(self.surface_id, self.cell_index, self.layer)


@dataclass(frozen=True)
class CellSlot:
    surface_id: int
    cell_index: int
    layer: int
    center: tuple[float, float, float]  # deck-surface point of the cell
    max_stack: int
    occupants: tuple[int, ...] = ()

    @property
    def address(self) -> CellAddress:
        return CellAddress(self.surface_id, self.cell_index, self.layer)

    @property
    def height(self) -> int:
        return len(self.occupants)

    @property
    def is_open(self) -> bool:
        return self.height < self.max_stack

    def insertion_center(self, box_size: float, level: int | None = None) -> tuple[float, float, float]:
        """Center of the box that would occupy stack level ``level`` (default: next)."""
        lvl = self.height if level is None else level
        return (self.center[0], self.center[1], self.center[2] + (lvl + 0.5) * box_size)


@dataclass(frozen=True)
class Surface:
    id: int
    kind: SurfaceKind
    pose: Pose  # z is always 0 (floor-standing)
    cells: tuple[CellSlot, ...]

    def half_extents(self, config: WorldConfig) -> tuple[float, float]:
        hx, hy = surface_half_extents(self.kind, config)
        if abs(self.pose.yaw - math.pi / 2) < 1e-9:
            return hy, hx
        return hx, hy


@dataclass(frozen=True)
class BoxItem:
    id: int
    color: Color
    pose: Pose
    placement: BoxPlacement | None = None  # None => unplaced on the floor

    @property
    def is_placed(self) -> bool:
        return self.placement is not None


@dataclass(frozen=True)
class Distractor:
    id: int
    kind: DistractorKind
    pose: Pose

    @property
    def half_extents(self) -> tuple[float, float, float]:
        return DISTRACTOR_HALF_EXTENTS[self.kind]


def build_surface(surface_id: int, kind: SurfaceKind, x: float, y: float, yaw: float, config: WorldConfig) -> Surface:
    """Construct a surface with its full cell grid at a world pose."""
    spec = surface_spec(kind, config)
    pitch = config.cell_pitch
    deck_heights = (config.pallet_deck_height,) if kind.is_pallet else config.shelf_layer_heights[: spec.layers]
    cos_y, sin_y = math.cos(yaw), math.sin(yaw)
    cells = []
    for layer, deck_z in enumerate(deck_heights):
        for row in range(spec.rows):
            for col in range(spec.cols):
                lx = (col - (spec.cols - 1) / 2.0) * pitch
                ly = (row - (spec.rows - 1) / 2.0) * pitch
                wx = x + cos_y * lx - sin_y * ly
                wy = y + sin_y * lx + cos_y * ly
                cells.append(
                    CellSlot(
                        surface_id=surface_id,
                        cell_index=row * spec.cols + col,
                        layer=layer,
                        center=(wx, wy, deck_z),
                        max_stack=spec.max_stack,
                    )
                )
    return Surface(id=surface_id, kind=kind, pose=Pose(x, y, 0.0, yaw), cells=tuple(cells))


# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FreeCellTarget:
    surface_id: int
    cell_index: int
    layer: int

    def to_dict(self) -> dict:
        return {"kind": "free-cell", "surface_id": self.surface_id, "cell_index": self.cell_index, "layer": self.layer}


@dataclass(frozen=True)
class StackTopTarget:
    base_box_id: int

    def to_dict(self) -> dict:
        return {"kind": "stack-top", "base_box_id": self.base_box_id}


PutdownTarget = Union[FreeCellTarget, StackTopTarget]


def putdown_from_dict(d: dict) -> PutdownTarget:
    if d["kind"] == "free-cell":
        return FreeCellTarget(d["surface_id"], d["cell_index"], d["layer"])
    if d["kind"] == "stack-top":
        return StackTopTarget(d["base_box_id"])
    raise ValueError(f"unknown putdown kind: {d['kind']!r}")


@dataclass(frozen=True)
class Action:
    pickup_id: int
    putdown: PutdownTarget

    def to_dict(self) -> dict:
        return {"pickup_id": self.pickup_id, "putdown": self.putdown.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Action":
        return cls(d["pickup_id"], putdown_from_dict(d["putdown"]))


# ---------------------------------------------------------------------------
# Scene state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SceneState:
    config: WorldConfig
    boxes: tuple[BoxItem, ...]
    surfaces: tuple[Surface, ...]
    distractors: tuple[Distractor, ...] = ()
    step_count: int = 0

    # Lookup maps are cached on the instance; the state itself never mutates.
    @cached_property
    def _box_by_id(self) -> dict[int, BoxItem]:
        return {b.id: b for b in self.boxes}

    @cached_property
    def _surface_by_id(self) -> dict[int, Surface]:
        return {s.id: s for s in self.surfaces}

    def box(self, box_id: int) -> BoxItem:
        return self._box_by_id[box_id]

    def surface(self, surface_id: int) -> Surface:
        return self._surface_by_id[surface_id]

    def has_box(self, box_id: int) -> bool:
        return box_id in self._box_by_id

    def cell(self, addr: CellAddress) -> CellSlot:
        surface = self.surface(addr.surface_id)
        for c in surface.cells:
            if c.cell_index == addr.cell_index and c.layer == addr.layer:
                return c
        raise KeyError(addr)

    def iter_cells(self) -> Iterator[CellSlot]:
        for surface in self.surfaces:
            yield from surface.cells

    def column_top(self, addr: CellAddress) -> int | None:
        occ = self.cell(addr).occupants
        return occ[-1] if occ else None


def free_cells(state: SceneState) -> tuple[CellSlot, ...]:
    """Cells that can accept a box at their current insertion level."""
    return tuple(c for c in state.iter_cells() if c.is_open)


def placed_boxes(state: SceneState) -> frozenset[int]:
    return frozenset(b.id for b in state.boxes if b.is_placed)


def unplaced_boxes(state: SceneState) -> frozenset[int]:
    return frozenset(b.id for b in state.boxes if not b.is_placed)


def stacked_boxes(state: SceneState) -> frozenset[int]:
    """Members of columns with height > 1."""
    out: set[int] = set()
    for c in state.iter_cells():
        if c.height > 1:
            out.update(c.occupants)
    return frozenset(out)


def accessible_boxes(state: SceneState) -> frozenset[int]:
    """Boxes with no box resting directly on top."""
    out: set[int] = set()
    for b in state.boxes:
        if not b.is_placed:
            out.add(b.id)
    for c in state.iter_cells():
        if c.occupants:
            out.add(c.occupants[-1])
    return frozenset(out)


def is_accessible(state: SceneState, box_id: int) -> bool:
    box = state.box(box_id)
    if not box.is_placed:
        return True
    return state.column_top(box.placement.cell) == box_id


# ---------------------------------------------------------------------------
# Action execution
# ---------------------------------------------------------------------------


def _remove_from_column(state: SceneState, box: BoxItem) -> SceneState:
    addr = box.placement.cell
    surface = state.surface(addr.surface_id)
    new_cells = tuple(
        replace(c, occupants=tuple(o for o in c.occupants if o != box.id))
        if (c.cell_index == addr.cell_index and c.layer == addr.layer)
        else c
        for c in surface.cells
    )
    new_surfaces = tuple(replace(s, cells=new_cells) if s.id == surface.id else s for s in state.surfaces)
    return replace(state, surfaces=new_surfaces)


def resolve_putdown(state: SceneState, putdown: PutdownTarget, pickup_id: int | None = None) -> CellSlot:
    """Resolve a putdown target to the cell it inserts into.

    Raises ActionError with codes: slot-missing, slot-occupied, base-not-top,
    pickup-equals-support, slot-full.
    """
    if isinstance(putdown, FreeCellTarget):
        try:
            cell = state.cell(CellAddress(putdown.surface_id, putdown.cell_index, putdown.layer))
        except KeyError:
            raise ActionError(code="slot-missing") from None
        if cell.occupants:
            raise ActionError(code="slot-occupied")
        return cell
    if not state.has_box(putdown.base_box_id):
        raise ActionError(code="slot-missing")
    if pickup_id is not None and putdown.base_box_id == pickup_id:
        raise ActionError(code="pickup-equals-support")
    base = state.box(putdown.base_box_id)
    if not base.is_placed:
        raise ActionError(code="slot-missing")
    cell = state.cell(base.placement.cell)
    if cell.occupants[-1] != base.id:
        raise ActionError(code="base-not-top")
    if not cell.is_open:
        raise ActionError(code="slot-full")
    return cell


def snap_freeform_point(state: SceneState, point: tuple[float, float, float]) -> PutdownTarget | None:
    """Snap a continuous putdown point to a placement slot, or None.

    A cell qualifies when the point is within half a cell pitch of its center
    on both horizontal axes; among qualifying cells the one whose insertion
    height best matches the point is chosen (this disambiguates shelf layers).
    Returns a stack-top target when the snapped cell already holds boxes.
    """
    tol = state.config.snap_tolerance
    box_h = state.config.box_size
    best_key = None
    best_cell = None
    for cell in state.iter_cells():
        dx = abs(point[0] - cell.center[0])
        dy = abs(point[1] - cell.center[1])
        if dx > tol or dy > tol:
            continue
        ins_level = min(cell.height, cell.max_stack - 1)
        ins_z = cell.center[2] + (ins_level + 0.5) * box_h
        key = (round(abs(point[2] - ins_z), 9), round(math.hypot(dx, dy), 9), cell.surface_id, cell.cell_index, cell.layer)
        if best_key is None or key < best_key:
            best_key = key
            best_cell = cell
    if best_cell is None:
        return None
    if best_cell.occupants:
        return StackTopTarget(base_box_id=best_cell.occupants[-1])
    return FreeCellTarget(best_cell.surface_id, best_cell.cell_index, best_cell.layer)


def apply_action(
    state: SceneState,
    action: Action,
    mode: ExecutionMode = ExecutionMode.SNAP,
    freeform_point: tuple[float, float, float] | None = None,
) -> SceneState:
    """Execute a pick-and-place action, returning the successor state.

    In free-form mode the putdown slot is re-derived by snapping
    ``freeform_point``; outside snap tolerance the placement is
    geometrically infeasible and raises ``freeform-out-of-tolerance``.
    """
    if not state.has_box(action.pickup_id):
        raise ActionError(code="pickup-missing")
    box = state.box(action.pickup_id)
    if not is_accessible(state, box.id):
        raise ActionError(code="pickup-inaccessible")

    # Lift the box (held only transiently inside this function).
    intermediate = _remove_from_column(state, box) if box.is_placed else state

    if mode == ExecutionMode.FREEFORM:
        if freeform_point is None:
            raise ActionError(code="freeform-point-missing")
        putdown = snap_freeform_point(intermediate, freeform_point)
        if putdown is None:
            raise ActionError(code="freeform-out-of-tolerance")
    else:
        putdown = action.putdown

    cell = resolve_putdown(intermediate, putdown, pickup_id=box.id)
    surface = intermediate.surface(cell.surface_id)
    level = cell.height
    new_pose = Pose(
        cell.center[0],
        cell.center[1],
        cell.center[2] + (level + 0.5) * state.config.box_size,
        surface.pose.yaw,
    )
    new_box = replace(
        box,
        pose=new_pose,
        placement=BoxPlacement(cell.surface_id, cell.cell_index, cell.layer, level),
    )
    new_cells = tuple(
        replace(c, occupants=c.occupants + (box.id,))
        if (c.cell_index == cell.cell_index and c.layer == cell.layer)
        else c
        for c in surface.cells
    )
    new_surfaces = tuple(replace(s, cells=new_cells) if s.id == surface.id else s for s in intermediate.surfaces)
    new_boxes = tuple(new_box if b.id == box.id else b for b in intermediate.boxes)
    return replace(intermediate, boxes=new_boxes, surfaces=new_surfaces, step_count=state.step_count + 1)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def scene_to_snapshot(state: SceneState) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": state.config.to_dict(),
        "step_count": state.step_count,
        "surfaces": [
            {
                "id": s.id,
                "kind": s.kind.value,
                "pose": s.pose.to_dict(),
                "cells": [
                    {
                        "cell_index": c.cell_index,
                        "layer": c.layer,
                        "center": list(c.center),
                        "max_stack": c.max_stack,
                        "occupants": list(c.occupants),
                    }
                    for c in s.cells
                ],
            }
            for s in state.surfaces
        ],
        "boxes": [
            {
                "id": b.id,
                "color": b.color.value,
                "pose": b.pose.to_dict(),
                "placement": list((*b.placement.cell.to_list(), b.placement.level)) if b.placement else None,
            }
            for b in state.boxes
        ],
        "distractors": [
            {"id": d.id, "kind": d.kind.value, "pose": d.pose.to_dict()} for d in state.distractors
        ],
    }


def scene_from_snapshot(snap: dict) -> SceneState:
    config = WorldConfig.from_dict(snap["config"])
    surfaces = tuple(
        Surface(
            id=s["id"],
            kind=SurfaceKind(s["kind"]),
            pose=Pose.from_dict(s["pose"]),
            cells=tuple(
                CellSlot(
                    surface_id=s["id"],
                    cell_index=c["cell_index"],
                    layer=c["layer"],
                    center=tuple(c["center"]),
                    max_stack=c["max_stack"],
                    occupants=tuple(c["occupants"]),
                )
                for c in s["cells"]
            ),
        )
        for s in snap["surfaces"]
    )
    boxes = tuple(
        BoxItem(
            id=b["id"],
            color=Color(b["color"]),
            pose=Pose.from_dict(b["pose"]),
            placement=BoxPlacement(*b["placement"]) if b["placement"] else None,
        )
        for b in snap["boxes"]
    )
    distractors = tuple(
        Distractor(id=d["id"], kind=DistractorKind(d["kind"]), pose=Pose.from_dict(d["pose"]))
        for d in snap["distractors"]
    )
    return SceneState(
        config=config,
        boxes=boxes,
        surfaces=surfaces,
        distractors=distractors,
        step_count=snap["step_count"],
    )


def scene_digest(state: SceneState) -> str:
    return canonical_digest(scene_to_snapshot(state))


def occupancy_map(state: SceneState) -> dict[tuple[int, int, int], tuple[int, ...]]:
    """Cell address -> occupant tuple, for equality checks in tests."""
    return {(c.surface_id, c.cell_index, c.layer): c.occupants for c in state.iter_cells()}


def validate_scene(state: SceneState) -> list[str]:
    """Check the core scene invariants; returns a list of violation strings."""
    problems: list[str] = []
    if not (1 <= len(state.boxes) <= 30):
        problems.append(f"box count {len(state.boxes)} outside [1, 30]")
    n_pallets = sum(1 for s in state.surfaces if s.kind.is_pallet)
    n_shelves = len(state.surfaces) - n_pallets
    if n_pallets > 3:
        problems.append(f"{n_pallets} pallets > 3")
    if n_shelves > 2:
        problems.append(f"{n_shelves} shelves > 2")
    if len(state.distractors) > 4:
        problems.append(f"{len(state.distractors)} distractors > 4")

    seen_ids = set()
    for b in state.boxes:
        if b.id in seen_ids:
            problems.append(f"duplicate box id {b.id}")
        seen_ids.add(b.id)

    cell_claims: dict[int, tuple[int, int, int, int]] = {}
    for c in state.iter_cells():
        if c.height > c.max_stack:
            problems.append(f"cell {c.address} over max stack")
        for level, occ in enumerate(c.occupants):
            if occ in cell_claims:
                problems.append(f"box {occ} in two columns")
            cell_claims[occ] = (c.surface_id, c.cell_index, c.layer, level)

    box_h = state.config.box_size
    for b in state.boxes:
        if b.is_placed:
            p = b.placement
            claim = cell_claims.get(b.id)
            if claim != (p.surface_id, p.cell_index, p.layer, p.level):
                problems.append(f"box {b.id} placement disagrees with cell occupancy")
                continue
            cell = state.cell(p.cell)
            expected_z = cell.center[2] + (p.level + 0.5) * box_h
            if (
                abs(b.pose.x - cell.center[0]) > 1e-9
                or abs(b.pose.y - cell.center[1]) > 1e-9
                or abs(b.pose.z - expected_z) > 1e-9
            ):
                problems.append(f"box {b.id} pose inconsistent with placement")
            yaw = b.pose.yaw % (2 * math.pi)
            if min(abs(yaw), abs(yaw - math.pi / 2), abs(yaw - 2 * math.pi)) > 1e-9:
                problems.append(f"placed box {b.id} yaw not in {{0, pi/2}}")
        elif b.id in cell_claims:
            problems.append(f"unplaced box {b.id} listed in a column")
    half = state.config.floor_extent / 2.0
    for b in state.boxes:
        if abs(b.pose.x) > half or abs(b.pose.y) > half:
            problems.append(f"box {b.id} outside the floor")
    return problems
