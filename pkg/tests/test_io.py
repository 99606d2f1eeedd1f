import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hele_shaw_lab import io as IO
from hele_shaw_lab.field_core import MultiValuedSample


def sample(shape, seed=0):
    rng = np.random.default_rng(seed)
    lo = rng.normal(size=shape)
    hi = lo + rng.uniform(0, 1, size=shape)
    lo.flat[0] = hi.flat[0] = np.nan
    return MultiValuedSample(lo, hi)


def same(a, b):
    return (np.array_equal(a.lo, b.lo, equal_nan=True) and np.array_equal(a.hi, b.hi, equal_nan=True)
            and a.shape == b.shape)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=3), st.integers(0, 99))
def test_hhf1_round_trip(dims, seed):
    v = sample(tuple(dims), seed)
    assert same(IO.field_from_bytes(IO.field_to_bytes(v)), v)


def test_hhf1_layout():
    v = MultiValuedSample(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    b = IO.field_to_bytes(v)
    assert b[:4] == b"HHF1"
    assert struct.unpack("<II", b[4:12]) == (1, 2)
    assert struct.unpack("<4d", b[12:]) == (1.0, 2.0, 3.0, 4.0)


def test_hhf1_rejects_bad_input():
    b = IO.field_to_bytes(sample((3,)))
    with pytest.raises(ValueError, match="magic"):
        IO.field_from_bytes(b"XXXX" + b[4:])
    with pytest.raises(ValueError, match="bytes"):
        IO.field_from_bytes(b[:-1])


def test_binary_file_round_trip(tmp_path):
    v = sample((4, 5))
    IO.write_field_binary(tmp_path / "f.hhf", v)
    assert same(IO.read_field_binary(tmp_path / "f.hhf"), v)
    assert [p.name for p in tmp_path.iterdir()] == ["f.hhf"]


def test_field_csv_round_trip(tmp_path):
    v = sample((6,))
    x = np.linspace(0, 1, 6)
    IO.write_field_csv(tmp_path / "f.csv", v, {"x": x})
    back, coords = IO.read_field_csv(tmp_path / "f.csv")
    assert same(back, v)
    assert np.array_equal(coords["x"], x)
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "node,x,lo,hi"


def test_csv_float_format_round_trips():
    for x in (0.1, 1 / 3, 1e-300, -2.5e17, np.float64(np.pi)):
        assert float(IO.fmt(x)) == float(x)
    assert IO.fmt(np.int64(3)) == "3" and IO.fmt(float("nan")) == "nan"


def test_json_deterministic_and_plain(tmp_path):
    obj = {"b": np.float64(1.5), "a": np.arange(3), "c": np.bool_(True), "d": float("inf")}
    s = IO.dumps_json(obj)
    assert s == IO.dumps_json(dict(reversed(list(obj.items()))))
    assert json.loads(s) == {"a": [0, 1, 2], "b": 1.5, "c": True, "d": "inf"}


def test_jsonl(tmp_path):
    IO.write_jsonl(tmp_path / "t.jsonl", [{"step": 1, "r": np.float64(0.5)}, {"step": 2}])
    assert IO.read_jsonl(tmp_path / "t.jsonl") == [{"r": 0.5, "step": 1}, {"step": 2}]
