import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from palletbench.encoding import (
    canonical_digest,
    canonical_dumps,
    decode_cloud,
    encode_cloud,
    mask_to_rle,
    rle_to_mask,
)


def test_canonical_sorted_keys_and_float_format():
    s = canonical_dumps({"b": 1.0, "a": 0.123456789, "c": [1, 2.5, None, True]})
    assert s == '{"a":0.123457,"b":1.000000,"c":[1,2.500000,null,true]}'


def test_canonical_negative_zero_normalized():
    assert canonical_dumps(-0.0) == "0.000000"
    assert canonical_dumps(-1e-9) == "0.000000"


def test_canonical_is_idempotent_through_json():
    obj = {"x": 1.234567, "y": [0.1, 0.25], "z": "text"}
    once = canonical_dumps(obj)
    again = canonical_dumps(json.loads(once))
    assert once == again


def test_canonical_rejects_nan():
    with pytest.raises(ValueError):
        canonical_dumps(float("nan"))


def test_digest_stable():
    assert canonical_digest({"a": 1}) == canonical_digest({"a": 1})
    assert canonical_digest({"a": 1}) != canonical_digest({"a": 2})


def test_rle_examples():
    mask = np.array([False, True, True, False, False, True])
    assert mask_to_rle(mask) == [1, 2, 5, 1]
    assert rle_to_mask([1, 2, 5, 1], 6).tolist() == mask.tolist()
    assert mask_to_rle(np.zeros(4, dtype=bool)) == []


@given(st.lists(st.booleans(), max_size=200))
def test_rle_round_trip(bits):
    mask = np.array(bits, dtype=bool)
    assert rle_to_mask(mask_to_rle(mask), len(mask)).tolist() == mask.tolist()


def test_rle_rejects_bad_runs():
    with pytest.raises(ValueError):
        rle_to_mask([0, 2, 1, 1], 5)  # overlapping
    with pytest.raises(ValueError):
        rle_to_mask([0, 10], 5)  # out of range


def test_cloud_binary_round_trip():
    n = 17
    rng = np.random.default_rng(0)
    points = rng.normal(size=(n, 3))
    inst = rng.integers(0, 3, n).astype(np.int32)
    sem = rng.integers(0, 5, n).astype(np.uint8)
    color = rng.integers(-1, 3, n).astype(np.int8)
    instances = [["floor"], ["box", 0], ["cell", 0, 1, 0]]
    blob = encode_cloud(points, inst, sem, color, instances, 0.05, ["floor", "box"])
    out = decode_cloud(blob)
    assert out["points"].shape == (n, 3)
    np.testing.assert_allclose(out["points"], points.astype(np.float32), rtol=0, atol=0)
    assert out["instance_index"].tolist() == inst.tolist()
    assert out["semantic"].tolist() == sem.tolist()
    assert out["color_label"].tolist() == color.tolist()
    assert out["instances"] == [("floor",), ("box", 0), ("cell", 0, 1, 0)]
    # byte-stable re-encode
    blob2 = encode_cloud(
        out["points"], out["instance_index"], out["semantic"], out["color_label"], instances, 0.05, ["floor", "box"]
    )
    assert blob == blob2
