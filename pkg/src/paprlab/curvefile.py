"""Delimited curve files with a self-describing comment header.

Every file starts with `# key = value` metadata lines (always including the
build identifier and the config hash), followed by one CSV header line and
the data rows sorted by the x column.  Float formatting uses repr, so files
are byte-reproducible and values round-trip exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

__all__ = ["write_curve", "write_summary"]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_curve(path, meta: dict, columns: list[str], rows: list[tuple]) -> Path:
    """Write metadata, a header line and pre-sorted rows to a curve file."""
    path = Path(path)
    lines = [f"# {key} = {value}" for key, value in meta.items()]
    lines.append(",".join(columns))
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row width {len(row)} does not match {len(columns)} columns")
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_summary(path, payload: dict) -> Path:
    """Write one JSON summary record for a run (sorted keys, no timestamps)."""
    path = Path(path)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def read_curve(path) -> tuple[dict, list[str], list[list[str]]]:
    """Parse a curve file back into (meta, columns, raw string rows)."""
    meta: dict[str, str] = {}
    columns: list[str] = []
    rows: list[list[str]] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(" = ")
            meta[key] = value
        elif not columns:
            columns = line.split(",")
        elif line:
            rows.append(line.split(","))
    return meta, columns, rows
