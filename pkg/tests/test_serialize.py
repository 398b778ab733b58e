"""Tests for the deterministic table writer and its parser."""

import io
import json
import math

import numpy as np
import pytest

from coordsim.errors import DomainError, ShapeError
from coordsim.serialize import (
    config_json,
    format_float,
    read_table,
    write_table,
)


def _emit(config, columns, rows, fmt, extra=None):
    sink = io.StringIO()
    write_table(sink, config, columns, rows, fmt, extra=extra)
    return sink.getvalue()


def test_format_float_round_trips_exactly():
    rng = np.random.default_rng(11)
    samples = list(rng.normal(scale=1e3, size=40))
    samples += list(rng.exponential(scale=1e-12, size=20))
    samples += [0.0, -0.0, 1.0, 2.0 ** -1074, 1.7976931348623157e308, 0.1]
    for x in samples:
        assert float(format_float(float(x))) == float(x)


def test_csv_layout_and_tokens():
    text = _emit({"a": 1}, ["name", "value", "flag", "gap"],
                 [["row", 0.1, True, None], ["other", 2, False, 1.5]], "csv")
    lines = text.splitlines()
    assert lines[0] == '# config: {"a":1}'
    assert lines[1] == "name,value,flag,gap"
    assert lines[2] == "row,0.10000000000000001,true,"
    assert lines[3] == "other,2,false,1.5"


def test_json_mirrors_csv_tokens():
    config = {"b": 2, "a": [1.5, "x"]}
    columns = ["n", "v", "ok", "none"]
    rows = [[3, 0.1, True, None], [4, float("inf"), False, float("nan")]]
    csv_text = _emit(config, columns, rows, "csv")
    json_text = _emit(config, columns, rows, "json")
    c_cfg, c_cols, c_rows = read_table(csv_text)
    j_cfg, j_cols, j_rows = read_table(json_text)
    assert c_cfg == j_cfg == config
    assert c_cols == j_cols == columns
    assert c_rows == j_rows
    assert c_rows[1][1] == "inf" and c_rows[1][3] == "nan"
    # the JSON document itself is strictly parseable despite the non-finite cells
    json.loads(json_text)


def test_json_extra_payload():
    text = _emit({"s": "t"}, ["x"], [[1]], "json",
                 extra={"nested": {"vals": (0.25, 2), "arr": np.array([1.0, 0.5])}})
    doc = json.loads(text)
    assert doc["extra"]["nested"]["vals"] == [0.25, 2]
    assert doc["extra"]["nested"]["arr"] == [1.0, 0.5]


def test_write_table_validation():
    with pytest.raises(ShapeError):
        _emit({}, ["a", "b"], [[1]], "csv")
    with pytest.raises(DomainError):
        _emit({}, ["a"], [[1]], "xml")
    with pytest.raises(DomainError):
        _emit({}, ["a"], [["has,comma"]], "csv")
    with pytest.raises(DomainError):
        _emit({}, ["a"], [[object()]], "csv")


def test_config_json_is_canonical():
    assert config_json({"b": 1, "a": 2}) == '{"a":2,"b":1}'
    with pytest.raises(ValueError):
        config_json({"x": float("nan")})


def test_read_table_rejects_headerless_text():
    with pytest.raises(DomainError):
        read_table("n,gap\n1,0.5\n")


def test_identical_runs_identical_bytes():
    config = {"subcommand": "demo", "seed": 3}
    rows = [[i, math.sqrt(i + 0.1)] for i in range(5)]
    a = _emit(config, ["i", "r"], rows, "csv")
    b = _emit(config, ["i", "r"], rows, "csv")
    assert a == b
