"""Joint pickup/putdown query selection from per-query head outputs.

Works on any model's outputs: per-query pick/put confidences, pickup and
putdown embeddings, optional per-query candidate masks, and a scalar done
probability.  Selection takes the top-K pick candidates by confidence and
maximizes ``log c_pick + log c_put + w * <q_i, k_j>`` over ordered pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import rle_to_mask
from .errors import PalletBenchError

DEFAULT_TOP_K = 5
DEFAULT_COMPAT_WEIGHT = 1.0
DEFAULT_DONE_THRESHOLD = 0.5
_CONF_FLOOR = 1e-12


@dataclass
class QueryOutputs:
    pick_confidence: np.ndarray  # (Q,)
    put_confidence: np.ndarray  # (Q,)
    pick_embeddings: np.ndarray  # (Q, D)
    put_embeddings: np.ndarray  # (Q, D)
    done_probability: float = 0.0
    candidate_masks: np.ndarray | None = None  # (Q, N) bool

    def __post_init__(self) -> None:
        self.pick_confidence = np.asarray(self.pick_confidence, dtype=np.float64)
        self.put_confidence = np.asarray(self.put_confidence, dtype=np.float64)
        self.pick_embeddings = np.asarray(self.pick_embeddings, dtype=np.float64)
        self.put_embeddings = np.asarray(self.put_embeddings, dtype=np.float64)
        q = len(self.pick_confidence)
        if q < 2:
            raise PalletBenchError(code="no-candidates")
        if self.pick_embeddings.shape != self.put_embeddings.shape:
            raise PalletBenchError(code="dimension-mismatch")
        if self.pick_embeddings.shape[0] != q or len(self.put_confidence) != q:
            raise PalletBenchError(code="dimension-mismatch")
        if not (np.isfinite(self.pick_confidence).all() and np.isfinite(self.put_confidence).all()):
            raise PalletBenchError(code="dimension-mismatch")

    @property
    def num_queries(self) -> int:
        return len(self.pick_confidence)


def pair_scores(outputs: QueryOutputs) -> np.ndarray:
    """Compatibility matrix s[i, j] = <q_i, k_j>; the diagonal is NaN (excluded)."""
    s = outputs.pick_embeddings @ outputs.put_embeddings.T
    np.fill_diagonal(s, np.nan)
    return s


def select_action_pair(
    outputs: QueryOutputs,
    top_k: int = DEFAULT_TOP_K,
    compat_weight: float = DEFAULT_COMPAT_WEIGHT,
) -> tuple[int, int, float]:
    """(pick query, put query, combined score) maximizing confidence + compatibility.

    Only the ``top_k`` queries by pick confidence are considered as pickups;
    confidences are clamped to 1e-12 before the log.  Exact ties resolve to
    the lexicographically smallest (i, j).
    """
    q = outputs.num_queries
    order = sorted(range(q), key=lambda i: (-outputs.pick_confidence[i], i))
    candidates = sorted(order[: min(top_k, q)])
    s = pair_scores(outputs)
    log_pick = np.log(np.maximum(outputs.pick_confidence, _CONF_FLOOR))
    log_put = np.log(np.maximum(outputs.put_confidence, _CONF_FLOOR))
    best: tuple[int, int] | None = None
    best_score = -np.inf
    for i in candidates:
        for j in range(q):
            if j == i:
                continue
            score = log_pick[i] + log_put[j] + compat_weight * s[i, j]
            if score > best_score:
                best_score = score
                best = (i, j)
    assert best is not None
    return best[0], best[1], float(best_score)


def decide_done(done_probability: float, threshold: float = DEFAULT_DONE_THRESHOLD) -> bool:
    """Episode termination signal; strictly greater than the threshold."""
    return done_probability > threshold


def query_outputs_from_wire(obj: dict, n_points: int | None = None) -> QueryOutputs:
    """Decode the NDJSON wire form of head outputs.

    Expected keys: pick_confidence, put_confidence, pick_embeddings,
    put_embeddings, done_probability, and optionally masks_rle (one RLE list
    per query over the step's cloud).
    """
    masks = None
    if obj.get("masks_rle") is not None:
        if n_points is None:
            raise PalletBenchError(code="dimension-mismatch")
        masks = np.stack([rle_to_mask(r, n_points) for r in obj["masks_rle"]])
    return QueryOutputs(
        pick_confidence=np.array(obj["pick_confidence"], dtype=np.float64),
        put_confidence=np.array(obj["put_confidence"], dtype=np.float64),
        pick_embeddings=np.array(obj["pick_embeddings"], dtype=np.float64),
        put_embeddings=np.array(obj["put_embeddings"], dtype=np.float64),
        done_probability=float(obj.get("done_probability", 0.0)),
        candidate_masks=masks,
    )


def masks_from_outputs(
    outputs: QueryOutputs,
    top_k: int = DEFAULT_TOP_K,
    compat_weight: float = DEFAULT_COMPAT_WEIGHT,
):
    """Select a pair and return its candidate masks as an ActionMaskPair."""
    from .perception import ActionMaskPair

    if outputs.candidate_masks is None:
        raise PalletBenchError(code="no-candidates")
    i, j, _ = select_action_pair(outputs, top_k=top_k, compat_weight=compat_weight)
    return ActionMaskPair(
        pick_mask=outputs.candidate_masks[i].copy(),
        target_mask=outputs.candidate_masks[j].copy(),
        done_probability=outputs.done_probability,
    )
