"""Seeded procedural scene construction.

Surfaces are rejection-sampled in their floor region with pairwise clearance;
boxes and distractors are scattered in a separate region with a minimum
center distance (a deterministic stand-in for physics settling).  Everything
is a pure function of the config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import CapacityError, PlacementExhaustedError, SceneError
from .rng import make_rng
from .world import (
    COLOR_ORDER,
    DISTRACTOR_HALF_EXTENTS,
    BoxItem,
    Distractor,
    DistractorKind,
    Pose,
    SceneState,
    Surface,
    SurfaceKind,
    WorldConfig,
    build_surface,
    surface_capacity,
    surface_half_extents,
)

MAX_PLACEMENT_ATTEMPTS = 10_000
SURFACE_CLEARANCE = 0.3
OBJECT_MIN_DISTANCE = 0.6
REGION_MARGIN = 0.3


def _default_size_mix() -> dict[str, float]:
    return {k.value: 1.0 for k in SurfaceKind}


@dataclass(frozen=True)
class SceneConfig:
    seed: int
    num_boxes: int
    num_pallets: int = 1
    num_shelves: int = 0
    num_distractors: int = 0
    size_mix: dict[str, float] = field(default_factory=_default_size_mix)
    # Spawn rectangles (xmin, xmax, ymin, ymax) within the 12 m x 12 m floor.
    surface_region: tuple[float, float, float, float] = (-6.0, 0.0, -6.0, 6.0)
    object_region: tuple[float, float, float, float] = (0.0, 6.0, -6.0, 6.0)
    color_counts: tuple[int, int, int] | None = None  # (red, blue, yellow)
    require_capacity: bool = True
    world: WorldConfig = field(default_factory=WorldConfig)

    def validate(self) -> None:
        if not (1 <= self.num_boxes <= 30):
            raise SceneError(f"num_boxes {self.num_boxes} outside [1, 30]")
        if not (0 <= self.num_pallets <= 3):
            raise SceneError(f"num_pallets {self.num_pallets} outside [0, 3]")
        if not (0 <= self.num_shelves <= 2):
            raise SceneError(f"num_shelves {self.num_shelves} outside [0, 2]")
        if not (0 <= self.num_distractors <= 4):
            raise SceneError(f"num_distractors {self.num_distractors} outside [0, 4]")
        if self.color_counts is not None and sum(self.color_counts) != self.num_boxes:
            raise SceneError("color_counts must sum to num_boxes")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "num_boxes": self.num_boxes,
            "num_pallets": self.num_pallets,
            "num_shelves": self.num_shelves,
            "num_distractors": self.num_distractors,
            "size_mix": dict(self.size_mix),
            "surface_region": list(self.surface_region),
            "object_region": list(self.object_region),
            "color_counts": list(self.color_counts) if self.color_counts else None,
            "require_capacity": self.require_capacity,
            "world": self.world.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        d = dict(d)
        d["size_mix"] = dict(d.get("size_mix") or _default_size_mix())
        d["surface_region"] = tuple(d.get("surface_region", (-6.0, 0.0, -6.0, 6.0)))
        d["object_region"] = tuple(d.get("object_region", (0.0, 6.0, -6.0, 6.0)))
        cc = d.get("color_counts")
        d["color_counts"] = tuple(cc) if cc else None
        d["world"] = WorldConfig.from_dict(d["world"]) if "world" in d else WorldConfig()
        return cls(**d)


def _pick_kind(rng, mix: dict[str, float], options: tuple[SurfaceKind, SurfaceKind]) -> SurfaceKind:
    weights = [max(0.0, mix.get(k.value, 0.0)) for k in options]
    total = sum(weights)
    if total <= 0:
        weights = [1.0, 1.0]
        total = 2.0
    u = rng.random() * total
    return options[0] if u < weights[0] else options[1]


def _aabb_separation(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    """Euclidean gap between two axis-aligned rectangles (0 if overlapping)."""
    gap_x = max(0.0, max(a[0] - b[1], b[0] - a[1]))
    gap_y = max(0.0, max(a[2] - b[3], b[2] - a[3]))
    return math.hypot(gap_x, gap_y)


def total_capacity(kinds: list[SurfaceKind], world: WorldConfig) -> int:
    return sum(surface_capacity(k, world) for k in kinds)


def generate_scene(config: SceneConfig) -> SceneState:
    """Build the initial scene for ``config``; deterministic given the seed."""
    config.validate()
    world = config.world

    kind_rng = make_rng(config.seed, "surface-kinds")
    kinds: list[SurfaceKind] = []
    for _ in range(config.num_pallets):
        kinds.append(_pick_kind(kind_rng, config.size_mix, (SurfaceKind.PALLET_SMALL, SurfaceKind.PALLET_LARGE)))
    for _ in range(config.num_shelves):
        kinds.append(_pick_kind(kind_rng, config.size_mix, (SurfaceKind.SHELF_SMALL, SurfaceKind.SHELF_LARGE)))

    if config.require_capacity and total_capacity(kinds, world) < config.num_boxes:
        raise CapacityError(
            f"capacity {total_capacity(kinds, world)} < {config.num_boxes} boxes"
        )

    surf_rng = make_rng(config.seed, "surfaces")
    placed_aabbs: list[tuple[float, float, float, float]] = []
    surfaces: list[Surface] = []
    xmin, xmax, ymin, ymax = config.surface_region
    for sid, kind in enumerate(kinds):
        hx0, hy0 = surface_half_extents(kind, world)
        for attempt in range(MAX_PLACEMENT_ATTEMPTS):
            x = surf_rng.uniform(xmin, xmax)
            y = surf_rng.uniform(ymin, ymax)
            yaw = 0.0 if surf_rng.random() < 0.5 else math.pi / 2
            hx, hy = (hy0, hx0) if yaw else (hx0, hy0)
            aabb = (x - hx, x + hx, y - hy, y + hy)
            if aabb[0] < xmin or aabb[1] > xmax or aabb[2] < ymin or aabb[3] > ymax:
                continue
            if all(_aabb_separation(aabb, other) >= SURFACE_CLEARANCE for other in placed_aabbs):
                placed_aabbs.append(aabb)
                surfaces.append(build_surface(sid, kind, x, y, yaw, world))
                break
        else:
            raise PlacementExhaustedError(f"could not place surface {sid} ({kind.value})")

    color_rng = make_rng(config.seed, "box-colors")
    if config.color_counts is not None:
        palette = [c for c, n in zip(COLOR_ORDER, config.color_counts) for _ in range(n)]
        order = color_rng.permutation(len(palette))
        colors = [palette[i] for i in order]
    else:
        colors = [COLOR_ORDER[int(color_rng.integers(0, 3))] for _ in range(config.num_boxes)]

    obj_rng = make_rng(config.seed, "objects")
    oxmin, oxmax, oymin, oymax = config.object_region
    oxmin, oxmax = oxmin + REGION_MARGIN, oxmax - REGION_MARGIN
    oymin, oymax = oymin + REGION_MARGIN, oymax - REGION_MARGIN
    centers: list[tuple[float, float]] = []

    def scatter() -> tuple[float, float, float]:
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            x = obj_rng.uniform(oxmin, oxmax)
            y = obj_rng.uniform(oymin, oymax)
            if all(math.hypot(x - cx, y - cy) >= OBJECT_MIN_DISTANCE for cx, cy in centers):
                centers.append((x, y))
                yaw = obj_rng.uniform(0.0, 2 * math.pi)
                return x, y, yaw
        raise PlacementExhaustedError("could not scatter floor object")

    boxes = []
    half_box = world.box_size / 2.0
    for bid in range(config.num_boxes):
        x, y, yaw = scatter()
        boxes.append(BoxItem(id=bid, color=colors[bid], pose=Pose(x, y, half_box, yaw)))

    distractor_kinds = list(DistractorKind)
    distractors = []
    for did in range(config.num_distractors):
        kind = distractor_kinds[int(obj_rng.integers(0, len(distractor_kinds)))]
        x, y, yaw = scatter()
        hz = DISTRACTOR_HALF_EXTENTS[kind][2]
        distractors.append(Distractor(id=did, kind=kind, pose=Pose(x, y, hz, yaw)))

    return SceneState(
        config=world,
        boxes=tuple(boxes),
        surfaces=tuple(surfaces),
        distractors=tuple(distractors),
    )
