import pytest

from aoisim import metrics
from aoisim.errors import SchemaError


def test_roundtrip(tmp_path):
    path = tmp_path / "m.csv"
    rows = [[0, 1, 0.1, True], [1, 2, 2.5e-3, False]]
    metrics.write_metrics(path, ["a", "b", "c", "d"], rows)
    header, got = metrics.read_metrics(path)
    assert header == ["a", "b", "c", "d"]
    assert got[0] == [0.0, 1.0, 0.1, 1.0]
    assert got[1][2] == 2.5e-3


def test_float_repr_is_byte_stable(tmp_path):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    rows = [[0.1 + 0.2], [1 / 3]]
    metrics.write_metrics(p1, ["x"], rows)
    metrics.write_metrics(p2, ["x"], rows)
    assert p1.read_bytes() == p2.read_bytes()
    # repr round-trips exactly
    _, got = metrics.read_metrics(p1)
    assert got[0][0] == 0.1 + 0.2


def test_schema_line_required(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError, match=r"bad\.csv:1"):
        metrics.read_metrics(path)


def test_unknown_version_rejected(tmp_path):
    path = tmp_path / "v9.csv"
    path.write_text("# aoisim-metrics v9\na,b\n1,2\n")
    with pytest.raises(SchemaError, match=":1"):
        metrics.read_metrics(path)


def test_field_count_mismatch_names_line(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text(metrics.SCHEMA_LINE + "\na,b\n1,2\n1\n")
    with pytest.raises(SchemaError, match=r"short\.csv:4"):
        metrics.read_metrics(path)


def test_lf_line_endings(tmp_path):
    path = tmp_path / "m.csv"
    metrics.write_metrics(path, ["x"], [[1.5]])
    data = path.read_bytes()
    assert b"\r" not in data
    assert data.endswith(b"\n")


def test_summary_roundtrip(tmp_path):
    path = tmp_path / "s.json"
    metrics.write_summary(path, {"k": 1, "nested": {"x": 0.5}})
    assert metrics.read_summary(path) == {"k": 1, "nested": {"x": 0.5}}


def test_summary_schema_rejected(tmp_path):
    path = tmp_path / "s.json"
    path.write_text('{"schema": "other", "summary": {}}')
    with pytest.raises(SchemaError):
        metrics.read_summary(path)
