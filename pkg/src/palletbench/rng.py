"""Deterministic, splittable random streams.

Every stochastic step in the benchmark draws from a named substream derived
from a 64-bit master seed.  Substream keys are SHA-256 hashes of the master
seed plus a label path, feeding a Philox4x64 counter-based generator, so
streams are stable across platforms and independent of how many draws other
substreams consumed.  The same derivation can be reproduced in any language
with SHA-256 and a Philox implementation.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(master_seed: int, *labels: object) -> int:
    """Derive a 64-bit substream seed from a master seed and a label path.

    Labels may be ints or strings; each is length-prefixed before hashing so
    distinct paths can never collide by concatenation.
    """
    h = hashlib.sha256()
    h.update((master_seed & _MASK64).to_bytes(8, "little"))
    for label in labels:
        if isinstance(label, bool):
            raise TypeError("bool labels are ambiguous; use int or str")
        if isinstance(label, int):
            data = b"i" + (label & _MASK64).to_bytes(8, "little")
        elif isinstance(label, str):
            raw = label.encode("utf-8")
            data = b"s" + len(raw).to_bytes(4, "little") + raw
        else:
            raise TypeError(f"unsupported label type: {type(label)!r}")
        h.update(len(data).to_bytes(4, "little") + data)
    return int.from_bytes(h.digest()[:8], "little")


def make_rng(master_seed: int, *labels: object) -> np.random.Generator:
    """Generator for the named substream of ``master_seed``."""
    key = derive_seed(master_seed, *labels)
    return np.random.Generator(np.random.Philox(key=np.uint64(key)))
