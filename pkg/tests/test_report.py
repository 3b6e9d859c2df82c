import numpy as np
import pytest

from conewave.report import atomic_write, canonical_json


def test_canonical_json_layout():
    text = canonical_json({"b": 0.1, "a": [1, -0.0, np.float64(1e-300)], "c": True, "d": None})
    assert text == (
        '{\n  "a": [\n    1,\n    0.0,\n    1e-300\n  ],\n'
        '  "b": 0.10000000000000001,\n  "c": true,\n  "d": null\n}\n'
    )


def test_canonical_json_rejects_nan():
    with pytest.raises(ValueError):
        canonical_json({"x": float("nan")})


def test_atomic_write(tmp_path):
    path = tmp_path / "sub" / "out.json"
    atomic_write(path, "one\n")
    atomic_write(path, "two\n")
    assert path.read_text() == "two\n"
    assert [p.name for p in path.parent.iterdir()] == ["out.json"]
