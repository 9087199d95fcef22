"""File-format helper checks: schema tags, atomic writes, config loading."""
import json

import pytest

from vqlab import _io


def test_schema_tag_format():
    assert _io.schema_tag("imos") == "vqlab.imos/1"
    assert _io.schema_tag("reports", 3) == "vqlab.reports/3"


def test_write_json_puts_schema_first(tmp_path):
    path = tmp_path / "out.json"
    _io.write_json(path, {"value": 7}, "thing")
    payload = json.loads(path.read_text())
    assert list(payload) == ["schema", "value"]
    assert payload["schema"] == "vqlab.thing/1"


def test_atomic_write_leaves_no_temp_files(tmp_path):
    path = tmp_path / "nested" / "file.txt"
    _io.atomic_write_text(path, "payload")
    assert path.read_text() == "payload"
    assert [p.name for p in path.parent.iterdir()] == ["file.txt"]


def test_atomic_write_replaces_existing(tmp_path):
    path = tmp_path / "file.txt"
    _io.atomic_write_text(path, "old")
    _io.atomic_write_text(path, "new")
    assert path.read_text() == "new"


def test_csv_round_trip_skips_comment_line(tmp_path):
    path = tmp_path / "table.csv"
    _io.write_csv(path, "toy", ["a", "b"], [[1, "x"], [2, "y"]])
    assert path.read_text().splitlines()[0] == "# vqlab.toy/1"
    header, rows = _io.read_csv_rows(path)
    assert header == ["a", "b"]
    assert rows == [["1", "x"], ["2", "y"]]


def test_read_csv_rejects_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("# vqlab.toy/1\n")
    with pytest.raises(ValueError, match="empty"):
        _io.read_csv_rows(path)


def test_load_config_json_and_toml(tmp_path):
    jpath = tmp_path / "config.json"
    jpath.write_text('{"seed": 3}')
    assert _io.load_config(jpath) == {"seed": 3}
    tpath = tmp_path / "config.toml"
    tpath.write_text('seed = 4\n[model]\npreset = "tiny"\n')
    assert _io.load_config(tpath) == {"seed": 4, "model": {"preset": "tiny"}}


def test_load_config_rejects_non_mapping(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("[1, 2]")
    with pytest.raises(ValueError, match="mapping"):
        _io.load_config(path)
