import json

import numpy as np
import pytest

from pointineq import serialize


def test_floats_round_trip_exactly():
    rng = np.random.default_rng(0)
    for x in rng.normal(size=200) * 10.0 ** rng.integers(-300, 300, size=200):
        assert float(serialize.format_float(x)) == x


def test_integral_floats_keep_a_decimal_point():
    assert serialize.format_float(10.0) == "10.0"
    assert serialize.format_float(1e20) == "1e+20"


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        serialize.format_float(float("nan"))


def test_document_is_valid_json_and_stable():
    doc = {"b": [1.5, 2.0], "a": {"rows": [[1.0, 2.0], [3.0, 4.0]]}, "s": "x", "n": None, "t": True}
    text = serialize.dumps(doc)
    assert json.loads(text) == doc
    assert serialize.dumps(json.loads(text)) == text
    assert serialize.loads(text) == doc


def test_write_and_read(tmp_path):
    path = tmp_path / "d.json"
    serialize.write_document(path, {"x": [0.1, 0.2]})
    assert serialize.read_document(path) == {"x": [0.1, 0.2]}
