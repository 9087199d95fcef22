"""Shared file-format helpers: atomic writes, JSON/TOML config loading, CSV schema tags."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

try:
    import tomllib  # Python >= 3.11
except ImportError:  # pragma: no cover - depends on interpreter version
    import tomli as tomllib

SCHEMA_PREFIX = "vqlab"


def schema_tag(kind: str, version: int = 1) -> str:
    return f"{SCHEMA_PREFIX}.{kind}/{version}"


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via temp file + rename so readers never observe partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str | Path, obj: Any, kind: str) -> None:
    payload = {"schema": schema_tag(kind)}
    payload.update(obj)
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=False) + "\n")


def write_csv(path: str | Path, kind: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """CSV with a leading schema comment line; consumers can skip lines starting with '#'."""
    import io

    buf = io.StringIO()
    buf.write(f"# {schema_tag(kind)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def read_csv_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    """Read a schema-tagged CSV, returning (header, rows). Comment lines are skipped."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def load_config(path: str | Path) -> dict:
    """Load a JSON or TOML mapping, dispatching on file extension."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: top-level config must be a mapping")
    return obj
