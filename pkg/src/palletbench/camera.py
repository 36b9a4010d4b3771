"""Pinhole cameras: the capture rig, top-down depth rendering, backprojection.

Conventions: camera frame has +z forward, +x right, +y down; depth is the
camera-frame z of the hit point; pixel (u, v) indexes (column, row) and the
pixel's ray passes through image coordinates exactly (u, v), so the principal
point lies on the optical axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PerceptionError
from .world import SceneState, surface_half_extents


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int = 512
    height: int = 512
    fx: float = 256.0
    fy: float = 256.0
    cx: float = 256.0
    cy: float = 256.0

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(**d)


def look_at_pose(position: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Camera-to-world 4x4 with +z toward ``target`` and world-up stabilized."""
    position = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - position
    forward = forward / np.linalg.norm(forward)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    norm = np.linalg.norm(right)
    if norm < 1e-12:  # looking straight up/down: pick world +x as right
        right = np.array([1.0, 0.0, 0.0])
    else:
        right = right / norm
    down = np.cross(forward, right)
    pose = np.eye(4)
    pose[:3, 0] = right
    pose[:3, 1] = down
    pose[:3, 2] = forward
    pose[:3, 3] = position
    return pose


def camera_rig(
    count: int = 30,
    radius: float = 5.0,
    height: float = 5.0,
    target: tuple[float, float, float] = (0.0, 0.0, 0.0),
    intrinsics: CameraIntrinsics | None = None,
) -> list[tuple[CameraIntrinsics, np.ndarray]]:
    """Capture rig: cameras evenly spaced on a circle, aimed at the scene center."""
    intr = intrinsics or CameraIntrinsics()
    rig = []
    for k in range(count):
        angle = 2 * math.pi * k / count
        pos = np.array([radius * math.cos(angle), radius * math.sin(angle), height])
        rig.append((intr, look_at_pose(pos, np.asarray(target, dtype=np.float64))))
    return rig


def topdown_camera(
    height: float = 10.0, intrinsics: CameraIntrinsics | None = None
) -> tuple[CameraIntrinsics, np.ndarray]:
    """Bird's-eye pinhole camera centered above the floor, looking straight down."""
    intr = intrinsics or CameraIntrinsics()
    pose = np.eye(4)
    pose[:3, :3] = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    pose[:3, 3] = [0.0, 0.0, height]
    return intr, pose


def project_to_pixel(
    point: np.ndarray, intrinsics: CameraIntrinsics, cam_to_world: np.ndarray
) -> tuple[float, float, float]:
    """World point -> continuous (u, v) and camera-frame depth."""
    rot = cam_to_world[:3, :3]
    p_cam = rot.T @ (np.asarray(point, dtype=np.float64) - cam_to_world[:3, 3])
    z = p_cam[2]
    if z <= 0:
        raise PerceptionError("point behind camera")
    u = intrinsics.fx * p_cam[0] / z + intrinsics.cx
    v = intrinsics.fy * p_cam[1] / z + intrinsics.cy
    return float(u), float(v), float(z)


def backproject_pixel(
    u: float, v: float, depth: float, intrinsics: CameraIntrinsics, cam_to_world: np.ndarray
) -> np.ndarray:
    """Continuous pixel + depth -> world point (exact pinhole inverse)."""
    x = (u - intrinsics.cx) / intrinsics.fx * depth
    y = (v - intrinsics.cy) / intrinsics.fy * depth
    p_cam = np.array([x, y, depth])
    return cam_to_world[:3, :3] @ p_cam + cam_to_world[:3, 3]


def backproject_2d(
    pixel: tuple[int, int],
    depth_image: np.ndarray,
    intrinsics: CameraIntrinsics,
    cam_to_world: np.ndarray,
) -> np.ndarray:
    """Integer pixel (u, v) of a depth image -> 3D world point.

    Raises PerceptionError codes out-of-bounds / invalid-depth.
    """
    u, v = pixel
    h, w = depth_image.shape
    if not (0 <= u < w and 0 <= v < h):
        raise PerceptionError(code="out-of-bounds")
    depth = float(depth_image[v, u])
    if not math.isfinite(depth) or depth <= 0:
        raise PerceptionError(code="invalid-depth")
    return backproject_pixel(float(u), float(v), depth, intrinsics, cam_to_world)


# ---------------------------------------------------------------------------
# Scene geometry as yaw-rotated boxes for ray casting
# ---------------------------------------------------------------------------

SHELF_SLAB_THICKNESS = 0.04


def scene_obbs(state: SceneState) -> list[tuple[np.ndarray, np.ndarray, float]]:
    """All solid geometry as (center, half_extents, yaw) boxes."""
    obbs: list[tuple[np.ndarray, np.ndarray, float]] = []
    cfg = state.config
    half_box = cfg.box_size / 2.0
    for s in state.surfaces:
        hx, hy = surface_half_extents(s.kind, cfg)
        if s.kind.is_pallet:
            deck = cfg.pallet_deck_height
            obbs.append(
                (
                    np.array([s.pose.x, s.pose.y, deck / 2.0]),
                    np.array([hx, hy, deck / 2.0]),
                    s.pose.yaw,
                )
            )
        else:
            for layer_z in cfg.shelf_layer_heights:
                obbs.append(
                    (
                        np.array([s.pose.x, s.pose.y, layer_z - SHELF_SLAB_THICKNESS / 2.0]),
                        np.array([hx, hy, SHELF_SLAB_THICKNESS / 2.0]),
                        s.pose.yaw,
                    )
                )
    for b in state.boxes:
        obbs.append(
            (
                np.array([b.pose.x, b.pose.y, b.pose.z]),
                np.array([half_box, half_box, half_box]),
                b.pose.yaw,
            )
        )
    for d in state.distractors:
        hx, hy, hz = d.half_extents
        obbs.append((np.array([d.pose.x, d.pose.y, d.pose.z]), np.array([hx, hy, hz]), d.pose.yaw))
    return obbs


def ray_box_intersection(
    origins: np.ndarray, dirs: np.ndarray, center: np.ndarray, half: np.ndarray, yaw: float
) -> np.ndarray:
    """Entry parameter t for rays vs a yaw-rotated box; inf where missed."""
    cos_y, sin_y = math.cos(yaw), math.sin(yaw)
    rot = np.array([[cos_y, -sin_y, 0.0], [sin_y, cos_y, 0.0], [0.0, 0.0, 1.0]])
    o = (origins - center) @ rot  # world->box frame (rot applied as inverse)
    d = dirs @ rot
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (-half - o) * inv
        t2 = (half - o) * inv
    t_near = np.nanmax(np.minimum(t1, t2), axis=-1)
    t_far = np.nanmin(np.maximum(t1, t2), axis=-1)
    # Parallel rays outside a slab never hit: detect via o outside bounds.
    parallel_miss = np.any((np.abs(d) < 1e-15) & (np.abs(o) > half), axis=-1)
    hit = (t_far >= t_near) & (t_far > 0) & ~parallel_miss
    t = np.where(t_near > 0, t_near, t_far)  # origin inside box: exit point
    return np.where(hit, t, np.inf)


def cast_rays(state: SceneState, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Nearest-hit parameter t per ray against the scene plus floor plane."""
    t_best = np.full(dirs.shape[0], np.inf)
    dz = dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_floor = -origins[:, 2] / dz
    valid = np.isfinite(t_floor) & (t_floor > 0)
    t_best = np.where(valid, t_floor, t_best)
    for center, half, yaw in scene_obbs(state):
        t = ray_box_intersection(origins, dirs, center, half, yaw)
        t_best = np.minimum(t_best, t)
    return t_best


def render_topdown_depth(
    state: SceneState, intrinsics: CameraIntrinsics, cam_to_world: np.ndarray
) -> np.ndarray:
    """Per-pixel nearest-surface depth (camera-frame z) for a top-down camera."""
    w, h = intrinsics.width, intrinsics.height
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    x = (us - intrinsics.cx) / intrinsics.fx
    y = (vs - intrinsics.cy) / intrinsics.fy
    dirs_cam = np.stack([x, y, np.ones_like(x)], axis=-1).reshape(-1, 3)
    rot = cam_to_world[:3, :3]
    dirs_world = dirs_cam @ rot.T
    origins = np.broadcast_to(cam_to_world[:3, 3], dirs_world.shape)
    # dirs have camera-frame z == 1, so the ray parameter t equals the depth.
    t = cast_rays(state, np.ascontiguousarray(origins), dirs_world)
    return t.reshape(h, w)
