"""Density-based clustering used to clean up predicted masks.

Standard DBSCAN over Euclidean distance.  Small inputs use a vectorized
adjacency matrix; larger ones fall back to a uniform spatial grid so
neighbor queries stay near-linear.  Semantics are pinned for
reproducibility and identical on both paths: a point is a core point when
at least ``min_pts`` points (itself included) lie within ``eps``; clusters
are seeded in ascending point order, so border points join the cluster
seeded earliest among those that reach them.
"""

from __future__ import annotations

from collections import deque

import numpy as np


def _grid_neighbors(points: np.ndarray, eps: float) -> list[np.ndarray]:
    """Indices within eps of each point (inclusive of the point itself)."""
    n = len(points)
    cells = np.floor(points / eps).astype(np.int64)
    buckets: dict[tuple[int, ...], list[int]] = {}
    for i, key in enumerate(map(tuple, cells)):
        buckets.setdefault(key, []).append(i)
    offsets = [
        (dx, dy, dz)
        for dx in (-1, 0, 1)
        for dy in (-1, 0, 1)
        for dz in (-1, 0, 1)
    ]
    eps2 = eps * eps
    neighbors: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for key, members in buckets.items():
        candidate_ids: list[int] = []
        for off in offsets:
            near = buckets.get((key[0] + off[0], key[1] + off[1], key[2] + off[2]))
            if near:
                candidate_ids.extend(near)
        cand = np.array(sorted(candidate_ids), dtype=np.int64)
        cand_pts = points[cand]
        for i in members:
            d2 = np.sum((cand_pts - points[i]) ** 2, axis=1)
            neighbors[i] = cand[d2 <= eps2]
    return neighbors


_DENSE_CUTOFF = 4000  # below this, a full adjacency matrix is faster


def _dense_labels(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    n = len(points)
    sq = np.einsum("ij,ij->i", points, points)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
    # matmul round-off can nudge exact-threshold pairs; recheck borderline ones
    thresh = eps * eps
    adj = d2 <= thresh + 1e-9
    borderline = adj & (d2 > thresh - 1e-9)
    if borderline.any():
        bi, bj = np.nonzero(borderline)
        exact = np.sum((points[bi] - points[bj]) ** 2, axis=1) <= thresh
        adj[bi, bj] = exact
    core = adj.sum(axis=1) >= min_pts
    labels = np.full(n, -1, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        frontier = np.array([i])
        while frontier.size:
            reach = adj[frontier].any(axis=0) & (labels == -1)
            idx = np.flatnonzero(reach)
            if idx.size == 0:
                break
            labels[idx] = cluster
            frontier = idx[core[idx]]
        cluster += 1
    return labels


def dbscan_labels(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Cluster labels per point; -1 marks noise."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0:
        return labels
    if n <= _DENSE_CUTOFF:
        return _dense_labels(points, eps, min_pts)
    neighbors = _grid_neighbors(points, eps)
    core = np.array([len(nb) >= min_pts for nb in neighbors])
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            j = queue.popleft()
            for k in neighbors[j]:
                if labels[k] == -1:
                    labels[k] = cluster
                    if core[k]:
                        queue.append(k)
        cluster += 1
    return labels


def dbscan_largest_cluster(
    points: np.ndarray, eps: float, min_pts: int
) -> tuple[np.ndarray, bool]:
    """Indices of the largest cluster, plus an all-noise flag.

    Size ties break toward the cluster containing the lowest point index.
    When no core point exists the result is an empty index array with the
    flag set.
    """
    labels = dbscan_labels(points, eps, min_pts)
    n_clusters = int(labels.max()) + 1 if labels.size else 0
    if n_clusters == 0:
        return np.empty(0, dtype=np.int64), True
    counts = np.bincount(labels[labels >= 0], minlength=n_clusters)
    best_size = counts.max()
    candidates = np.flatnonzero(counts == best_size)
    if len(candidates) == 1:
        best = int(candidates[0])
    else:
        first_member = {int(c): int(np.flatnonzero(labels == c)[0]) for c in candidates}
        best = min(first_member, key=lambda c: first_member[c])
    return np.flatnonzero(labels == best), False


def filter_mask_largest_cluster(
    points: np.ndarray, mask: np.ndarray, eps: float, min_pts: int
) -> tuple[np.ndarray, bool]:
    """Restrict a boolean mask over ``points`` to its largest dense cluster."""
    mask = np.asarray(mask, dtype=bool)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return mask.copy(), True
    keep, all_noise = dbscan_largest_cluster(points[idx], eps, min_pts)
    out = np.zeros_like(mask)
    if keep.size:
        out[idx[keep]] = True
    return out, all_noise
