"""Synthetic labeled point clouds and all mask-space geometry.

Clouds stand in for back-projected multi-view RGB-D: every entity's exposed
geometry is stratified-sampled at a fixed resolution and labeled with an
instance reference and a semantic class.  Masks are boolean vectors over the
cloud; they are the only action interface a policy needs.

The default cloud is omniscient (no occlusion culling for free cells); the
30-camera rig is recorded as dataset metadata only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .encoding import decode_cloud, encode_cloud
from .errors import EmptyMaskError, EntityAbsentError, PerceptionError
from .world import (
    Action,
    COLOR_ORDER,
    FreeCellTarget,
    SceneState,
    StackTopTarget,
)

SEMANTIC_CLASSES = ["floor", "box", "pallet-cell", "shelf-cell", "distractor"]
SEM_FLOOR, SEM_BOX, SEM_PALLET_CELL, SEM_SHELF_CELL, SEM_DISTRACTOR = range(5)

DEFAULT_RESOLUTION = 0.05
MIN_BOX_FACE_GRID = 3  # 6 faces x 3^2 >= 50 points per box at any resolution
MIN_CELL_PATCH_GRID = 5  # 5^2 >= 20 points per free-cell deck patch

EntityRef = tuple  # ("floor",) | ("box", id) | ("cell", sid, ci, layer) | ("distractor", id)


@dataclass
class LabeledPointCloud:
    points: np.ndarray  # (N, 3) float64
    instance_index: np.ndarray  # (N,) int32, row into ``instances``
    semantic: np.ndarray  # (N,) uint8
    color_label: np.ndarray  # (N,) int8; -1 where not a box
    instances: tuple[EntityRef, ...]
    resolution: float
    _instance_rows: dict[EntityRef, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self._instance_rows:
            self._instance_rows = {ref: i for i, ref in enumerate(self.instances)}

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def instance_row(self, ref: EntityRef) -> int | None:
        return self._instance_rows.get(tuple(ref))

    def instance_mask(self, ref: EntityRef) -> np.ndarray:
        row = self.instance_row(ref)
        if row is None:
            raise EntityAbsentError(f"entity {ref!r} not in cloud")
        return self.instance_index == row

    def to_bytes(self) -> bytes:
        return encode_cloud(
            self.points,
            self.instance_index,
            self.semantic,
            self.color_label,
            [list(ref) for ref in self.instances],
            self.resolution,
            SEMANTIC_CLASSES,
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "LabeledPointCloud":
        d = decode_cloud(data)
        return cls(
            points=d["points"],
            instance_index=d["instance_index"],
            semantic=d["semantic"],
            color_label=d["color_label"],
            instances=tuple(tuple(e) for e in d["instances"]),
            resolution=d["resolution"],
        )

    def to_ndjson(self) -> str:
        """Debug alternative to the binary format: header line, then one
        row object per point (x, y, z, instance, semantic, color)."""
        from .encoding import canonical_dumps

        lines = [
            canonical_dumps(
                {
                    "count": len(self),
                    "resolution": self.resolution,
                    "fields": ["x", "y", "z", "instance", "semantic", "color"],
                    "instances": [list(ref) for ref in self.instances],
                    "semantic_classes": SEMANTIC_CLASSES,
                }
            )
        ]
        pts = self.points.astype(np.float32)
        for i in range(len(self)):
            lines.append(
                canonical_dumps(
                    {
                        "x": float(pts[i, 0]),
                        "y": float(pts[i, 1]),
                        "z": float(pts[i, 2]),
                        "instance": int(self.instance_index[i]),
                        "semantic": int(self.semantic[i]),
                        "color": int(self.color_label[i]),
                    }
                )
            )
        return "\n".join(lines) + "\n"


@dataclass
class ActionMaskPair:
    pick_mask: np.ndarray
    target_mask: np.ndarray
    done_probability: float = 0.0


def _grid_count(edge: float, resolution: float, minimum: int) -> int:
    return max(minimum, int(round(edge / resolution)))


_GRID_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _grid_indices(nu: int, nv: int) -> np.ndarray:
    grid = _GRID_CACHE.get((nu, nv))
    if grid is None:
        iu, iv = np.meshgrid(np.arange(nu, dtype=np.float64), np.arange(nv, dtype=np.float64), indexing="ij")
        grid = np.stack([iu.reshape(-1), iv.reshape(-1)], axis=1)
        _GRID_CACHE[(nu, nv)] = grid
    return grid


def _stratified_rect(
    rng: np.random.Generator, nu: int, nv: int, eu: float, ev: float
) -> np.ndarray:
    """Jittered grid samples over a rectangle [0,eu]x[0,ev], one per cell."""
    grid = _grid_indices(nu, nv)
    uv = grid + rng.random((nu * nv, 2))
    uv = uv * np.array([eu / nu, ev / nv])
    return uv


def _box_faces(
    rng: np.random.Generator, center: np.ndarray, half: np.ndarray, yaw: float, n_per_edge: tuple[int, int, int]
) -> np.ndarray:
    """Stratified samples over all 6 faces of a yaw-rotated box."""
    nx, ny, nz = n_per_edge
    ex, ey, ez = 2 * half
    faces = []
    # +-x faces: (y, z) grids
    for sign in (1.0, -1.0):
        uv = _stratified_rect(rng, ny, nz, ey, ez)
        pts = np.column_stack([np.full(len(uv), sign * half[0]), uv[:, 0] - half[1], uv[:, 1] - half[2]])
        faces.append(pts)
    for sign in (1.0, -1.0):
        uv = _stratified_rect(rng, nx, nz, ex, ez)
        pts = np.column_stack([uv[:, 0] - half[0], np.full(len(uv), sign * half[1]), uv[:, 1] - half[2]])
        faces.append(pts)
    for sign in (1.0, -1.0):
        uv = _stratified_rect(rng, nx, ny, ex, ey)
        pts = np.column_stack([uv[:, 0] - half[0], uv[:, 1] - half[1], np.full(len(uv), sign * half[2])])
        faces.append(pts)
    local = np.concatenate(faces, axis=0)
    cos_y, sin_y = math.cos(yaw), math.sin(yaw)
    rot = np.array([[cos_y, -sin_y, 0.0], [sin_y, cos_y, 0.0], [0.0, 0.0, 1.0]])
    return local @ rot.T + center


def synthesize_cloud(
    state: SceneState,
    resolution: float = DEFAULT_RESOLUTION,
    seed: int = 0,
    visibility_rig=None,
) -> LabeledPointCloud:
    """Sample a labeled cloud of the scene's exposed geometry.

    Deterministic given (state, resolution, seed).  Instance order: floor,
    then free-cell deck patches, then boxes, then distractors.

    The default cloud is omniscient.  Passing a camera rig (a list of
    (intrinsics, camera-to-world) pairs) keeps only points actually visible
    from at least one camera; occluded entities may then fall below the
    per-entity point minimums, which is the view-dependent supervision gap
    this flag exists to expose.
    """
    from .rng import make_rng

    rng = make_rng(seed, "cloud")
    cfg = state.config
    instances: list[EntityRef] = []
    chunks: list[np.ndarray] = []
    inst_rows: list[np.ndarray] = []
    sems: list[np.ndarray] = []
    colors: list[np.ndarray] = []

    def add(ref: EntityRef, pts: np.ndarray, sem: int, color: int = -1) -> None:
        instances.append(ref)
        chunks.append(pts)
        row = len(instances) - 1
        inst_rows.append(np.full(len(pts), row, dtype=np.int32))
        sems.append(np.full(len(pts), sem, dtype=np.uint8))
        colors.append(np.full(len(pts), color, dtype=np.int8))

    # Floor, minus footprints of surfaces, floor boxes and distractors.
    half_floor = cfg.floor_extent / 2.0
    n_floor = _grid_count(cfg.floor_extent, resolution, 2)
    uv = _stratified_rect(rng, n_floor, n_floor, cfg.floor_extent, cfg.floor_extent)
    floor_pts = np.column_stack([uv[:, 0] - half_floor, uv[:, 1] - half_floor, np.zeros(len(uv))])
    keep = np.ones(len(floor_pts), dtype=bool)
    footprints: list[tuple[float, float, float, float, float]] = []  # x, y, hx, hy, yaw
    for s in state.surfaces:
        hx, hy = s.half_extents(cfg)
        footprints.append((s.pose.x, s.pose.y, hx, hy, 0.0))  # already yaw-expanded
    half_box = cfg.box_size / 2.0
    for b in state.boxes:
        if not b.is_placed:
            footprints.append((b.pose.x, b.pose.y, half_box, half_box, b.pose.yaw))
    for d in state.distractors:
        hx, hy, _ = d.half_extents
        footprints.append((d.pose.x, d.pose.y, hx, hy, d.pose.yaw))
    for fx, fy, hx, hy, yaw in footprints:
        dx = floor_pts[:, 0] - fx
        dy = floor_pts[:, 1] - fy
        if yaw:
            cos_y, sin_y = math.cos(yaw), math.sin(yaw)
            dx, dy = cos_y * dx + sin_y * dy, -sin_y * dx + cos_y * dy
        keep &= ~((np.abs(dx) <= hx) & (np.abs(dy) <= hy))
    add(("floor",), floor_pts[keep], SEM_FLOOR)

    # Deck patches of empty cells (occupied decks are covered).
    n_patch = _grid_count(cfg.cell_pitch, resolution, MIN_CELL_PATCH_GRID)
    half_pitch = cfg.cell_pitch / 2.0
    for s in state.surfaces:
        sem = SEM_PALLET_CELL if s.kind.is_pallet else SEM_SHELF_CELL
        cos_y, sin_y = math.cos(s.pose.yaw), math.sin(s.pose.yaw)
        for c in s.cells:
            if c.occupants:
                continue
            uv = _stratified_rect(rng, n_patch, n_patch, cfg.cell_pitch, cfg.cell_pitch)
            lx = uv[:, 0] - half_pitch
            ly = uv[:, 1] - half_pitch
            pts = np.column_stack(
                [
                    c.center[0] + cos_y * lx - sin_y * ly,
                    c.center[1] + sin_y * lx + cos_y * ly,
                    np.full(len(uv), c.center[2]),
                ]
            )
            add(("cell", s.id, c.cell_index, c.layer), pts, sem)

    n_box = _grid_count(cfg.box_size, resolution, MIN_BOX_FACE_GRID)
    color_rows = {color: i for i, color in enumerate(COLOR_ORDER)}
    for b in state.boxes:
        pts = _box_faces(
            rng,
            np.array([b.pose.x, b.pose.y, b.pose.z]),
            np.full(3, half_box),
            b.pose.yaw,
            (n_box, n_box, n_box),
        )
        add(("box", b.id), pts, SEM_BOX, color_rows[b.color])

    for d in state.distractors:
        hx, hy, hz = d.half_extents
        n = tuple(_grid_count(2 * e, resolution, 2) for e in (hx, hy, hz))
        pts = _box_faces(rng, np.array([d.pose.x, d.pose.y, d.pose.z]), np.array([hx, hy, hz]), d.pose.yaw, n)
        add(("distractor", d.id), pts, SEM_DISTRACTOR)

    cloud = LabeledPointCloud(
        points=np.concatenate(chunks, axis=0),
        instance_index=np.concatenate(inst_rows),
        semantic=np.concatenate(sems),
        color_label=np.concatenate(colors),
        instances=tuple(instances),
        resolution=resolution,
    )
    if visibility_rig is not None:
        keep = visible_from_rig(state, cloud.points, visibility_rig, tolerance=resolution)
        # drop instances that lost all points so the table stays tight
        kept_rows = np.unique(cloud.instance_index[keep])
        remap = {int(old): new for new, old in enumerate(kept_rows)}
        cloud = LabeledPointCloud(
            points=cloud.points[keep],
            instance_index=np.array(
                [remap[int(r)] for r in cloud.instance_index[keep]], dtype=np.int32
            ),
            semantic=cloud.semantic[keep],
            color_label=cloud.color_label[keep],
            instances=tuple(cloud.instances[int(r)] for r in kept_rows),
            resolution=resolution,
        )
    return cloud


def visible_from_rig(state: SceneState, points: np.ndarray, rig, tolerance: float) -> np.ndarray:
    """Boolean mask of points whose camera ray is not blocked before them.

    A point counts as visible from a camera when the scene's first hit along
    the camera-to-point ray is within ``tolerance`` of the point itself.
    """
    from .camera import cast_rays

    n = len(points)
    visible = np.zeros(n, dtype=bool)
    for _intrinsics, cam_to_world in rig:
        pending = ~visible
        if not pending.any():
            break
        idx = np.flatnonzero(pending)
        origin = cam_to_world[:3, 3]
        dirs = points[idx] - origin
        dist = np.linalg.norm(dirs, axis=1)
        ok = dist > 1e-9
        idx = idx[ok]
        dirs = dirs[ok] / dist[ok, None]
        t = cast_rays(state, np.broadcast_to(origin, dirs.shape), dirs)
        visible[idx] = t >= dist[ok] - tolerance
    return visible


def gt_action_masks(cloud: LabeledPointCloud, action: Action, done_probability: float = 0.0) -> ActionMaskPair:
    """Ground-truth masks for an action: the pickup box and its putdown region."""
    pick = cloud.instance_mask(("box", action.pickup_id))
    if isinstance(action.putdown, FreeCellTarget):
        t = action.putdown
        target = cloud.instance_mask(("cell", t.surface_id, t.cell_index, t.layer))
    elif isinstance(action.putdown, StackTopTarget):
        target = cloud.instance_mask(("box", action.putdown.base_box_id))
    else:  # pragma: no cover - exhaustive
        raise PerceptionError(f"unknown putdown {action.putdown!r}")
    return ActionMaskPair(pick_mask=pick, target_mask=target, done_probability=done_probability)


def mask_to_instance(cloud: LabeledPointCloud, mask: np.ndarray) -> tuple[EntityRef, float]:
    """Instance with highest coverage |mask ∩ instance| / |instance|.

    Ties break toward the earlier instance-table row (stable entity order).
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape[0] != len(cloud):
        raise PerceptionError("mask length does not match cloud")
    if not mask.any():
        raise EmptyMaskError()
    n_inst = len(cloud.instances)
    hit = np.bincount(cloud.instance_index[mask], minlength=n_inst)
    total = np.bincount(cloud.instance_index, minlength=n_inst)
    coverage = np.where(total > 0, hit / np.maximum(total, 1), 0.0)
    best = int(np.argmax(coverage))  # argmax returns the first (lowest row) max
    return cloud.instances[best], float(coverage[best])


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise PerceptionError("masks index different clouds")
    union = np.count_nonzero(a | b)
    if union == 0:
        raise EmptyMaskError("both masks empty")
    return float(np.count_nonzero(a & b) / union)


def freeform_putdown_point(cloud: LabeledPointCloud, target_mask: np.ndarray) -> np.ndarray:
    """Continuous putdown location: mean of the retained target-mask points."""
    target_mask = np.asarray(target_mask, dtype=bool)
    if not target_mask.any():
        raise EmptyMaskError("empty mask after filtering")
    return cloud.points[target_mask].mean(axis=0)


AUX_PREDICATES = ("free-cells", "placed-boxes", "stacked-boxes", "accessible-boxes", "unplaced-boxes")


def aux_predicate_mask(cloud: LabeledPointCloud, state: SceneState, predicate: str) -> np.ndarray:
    """Supervision mask for one of the five auxiliary scene queries.

    Free placement cells are grounded at what a box would rest on: the deck
    patch for an empty cell, the top box of a column that still has room.
    """
    from . import world

    mask = np.zeros(len(cloud), dtype=bool)
    if predicate == "free-cells":
        for c in world.free_cells(state):
            if c.occupants:
                ref: EntityRef = ("box", c.occupants[-1])
            else:
                ref = ("cell", c.surface_id, c.cell_index, c.layer)
            mask |= cloud.instance_mask(ref)
        return mask
    if predicate == "placed-boxes":
        ids = world.placed_boxes(state)
    elif predicate == "stacked-boxes":
        ids = world.stacked_boxes(state)
    elif predicate == "accessible-boxes":
        ids = world.accessible_boxes(state)
    elif predicate == "unplaced-boxes":
        ids = world.unplaced_boxes(state)
    else:
        raise PerceptionError(f"unknown predicate {predicate!r}")
    for box_id in sorted(ids):
        mask |= cloud.instance_mask(("box", box_id))
    return mask
