"""Shared scene builders for unit tests."""

from __future__ import annotations

import pytest

from palletbench.world import (
    BoxItem,
    Color,
    Pose,
    SceneState,
    SurfaceKind,
    WorldConfig,
    build_surface,
)


def manual_scene(
    n_boxes: int = 1,
    surface_kinds: tuple[SurfaceKind, ...] = (SurfaceKind.PALLET_SMALL,),
    colors: tuple[Color, ...] | None = None,
    box_positions: tuple[tuple[float, float], ...] | None = None,
    config: WorldConfig | None = None,
) -> SceneState:
    """Hand-built scene: surfaces in a row at x = -3, -6, ...; boxes at x >= 2."""
    cfg = config or WorldConfig()
    surfaces = tuple(
        build_surface(i, kind, -3.0 * (i + 1) + 1.0, 0.0, 0.0, cfg)
        for i, kind in enumerate(surface_kinds)
    )
    palette = colors or tuple(
        [Color.RED, Color.BLUE, Color.YELLOW][i % 3] for i in range(n_boxes)
    )
    half = cfg.box_size / 2.0
    boxes = []
    for i in range(n_boxes):
        if box_positions is not None:
            x, y = box_positions[i]
        else:
            x, y = 2.0 + 0.7 * (i % 6), -2.0 + 0.8 * (i // 6)
        boxes.append(BoxItem(id=i, color=palette[i], pose=Pose(x, y, half, 0.0)))
    return SceneState(config=cfg, boxes=tuple(boxes), surfaces=surfaces)


@pytest.fixture
def small_pallet_scene() -> SceneState:
    return manual_scene(n_boxes=2, surface_kinds=(SurfaceKind.PALLET_SMALL,))
