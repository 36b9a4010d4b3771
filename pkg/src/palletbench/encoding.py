"""Canonical serialization: stable JSON, run-length masks, binary clouds.

All artifacts the benchmark writes (scene snapshots, reports, manifests) go
through ``canonical_dumps`` so reruns with the same seed are byte-identical:
keys are sorted, floats printed with fixed 6-decimal formatting, no
timestamps anywhere.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any

import numpy as np

SCHEMA_VERSION = "1"

_CLOUD_MAGIC = b"PBPC0001"


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite float not serializable: {x}")
    r = round(x, 6)
    if r == 0.0:
        r = 0.0  # normalize -0.0
    return f"{r:.6f}"


def _canonical(obj: Any, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_format_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise TypeError(f"dict keys must be str, got {type(key)!r}")
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=True))
            out.append(":")
            _canonical(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _canonical(item, out)
        out.append("]")
    else:
        raise TypeError(f"not canonically serializable: {type(obj)!r}")


def canonical_dumps(obj: Any) -> str:
    """Serialize to canonical JSON (sorted keys, fixed float formatting)."""
    out: list[str] = []
    _canonical(obj, out)
    return "".join(out)


def canonical_digest(obj: Any) -> str:
    """SHA-256 hex digest of the canonical JSON form."""
    return hashlib.sha256(canonical_dumps(obj).encode("utf-8")).hexdigest()


def bytes_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------------------
# Run-length encoded boolean masks.
#
# A mask over N cloud points is stored as [start0, len0, start1, len1, ...]
# with strictly increasing, non-adjacent runs.  Compact and diff-friendly.
# ---------------------------------------------------------------------------


def mask_to_rle(mask: np.ndarray) -> list[int]:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 1:
        raise ValueError("mask must be 1-D")
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    starts = edges[0::2]
    ends = edges[1::2]
    rle: list[int] = []
    for s, e in zip(starts, ends):
        rle.extend((int(s), int(e - s)))
    return rle


def rle_to_mask(rle: list[int], n_points: int) -> np.ndarray:
    if len(rle) % 2 != 0:
        raise ValueError("RLE must have an even number of entries")
    mask = np.zeros(n_points, dtype=bool)
    prev_end = -1
    for i in range(0, len(rle), 2):
        start, length = rle[i], rle[i + 1]
        if length <= 0 or start <= prev_end:
            raise ValueError("RLE runs must be positive, sorted, non-adjacent")
        end = start + length
        if end > n_points:
            raise ValueError("RLE run exceeds point count")
        mask[start:end] = True
        prev_end = end
    return mask


# ---------------------------------------------------------------------------
# Binary point-cloud files.
#
# Layout (little-endian):
#   8 bytes   magic "PBPC0001"
#   4 bytes   uint32 header length
#   H bytes   canonical-JSON header: count, resolution, fields, instance
#             table, semantic class names
#   then packed columns: xyz float32 (count*3), instance int32,
#   semantic uint8, color int8
# ---------------------------------------------------------------------------

CLOUD_FIELDS = ["x", "y", "z", "instance", "semantic", "color"]


def encode_cloud(
    points: np.ndarray,
    instance_index: np.ndarray,
    semantic: np.ndarray,
    color_label: np.ndarray,
    instances: list[list],
    resolution: float,
    semantic_classes: list[str],
) -> bytes:
    count = int(points.shape[0])
    header = {
        "count": count,
        "resolution": resolution,
        "fields": CLOUD_FIELDS,
        "instances": instances,
        "semantic_classes": semantic_classes,
    }
    header_bytes = canonical_dumps(header).encode("utf-8")
    parts = [
        _CLOUD_MAGIC,
        len(header_bytes).to_bytes(4, "little"),
        header_bytes,
        np.ascontiguousarray(points, dtype="<f4").tobytes(),
        np.ascontiguousarray(instance_index, dtype="<i4").tobytes(),
        np.ascontiguousarray(semantic, dtype=np.uint8).tobytes(),
        np.ascontiguousarray(color_label, dtype=np.int8).tobytes(),
    ]
    return b"".join(parts)


def decode_cloud(data: bytes) -> dict:
    if data[:8] != _CLOUD_MAGIC:
        raise ValueError("bad cloud magic")
    header_len = int.from_bytes(data[8:12], "little")
    header = json.loads(data[12 : 12 + header_len])
    count = header["count"]
    off = 12 + header_len
    xyz = np.frombuffer(data, dtype="<f4", count=count * 3, offset=off)
    off += count * 12
    inst = np.frombuffer(data, dtype="<i4", count=count, offset=off)
    off += count * 4
    sem = np.frombuffer(data, dtype=np.uint8, count=count, offset=off)
    off += count
    color = np.frombuffer(data, dtype=np.int8, count=count, offset=off)
    off += count
    if off != len(data):
        raise ValueError("trailing bytes in cloud file")
    return {
        "points": xyz.reshape(count, 3).astype(np.float64),
        "instance_index": inst.astype(np.int32),
        "semantic": sem.copy(),
        "color_label": color.copy(),
        "instances": [tuple(e) for e in header["instances"]],
        "resolution": float(header["resolution"]),
        "semantic_classes": list(header["semantic_classes"]),
    }
