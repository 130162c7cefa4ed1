"""Schema-versioned delimited metrics files and JSON run summaries.

Every metrics file starts with a version line `# aoisim-metrics v1`
followed by a comma-separated header row; readers reject unknown versions.
Floats are written with repr so outputs are byte-stable across runs.
"""

import json

from .errors import SchemaError

SCHEMA_LINE = "# aoisim-metrics v1"


def _fmt(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(SCHEMA_LINE + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_metrics(path):
    """Returns (header, rows) with numeric fields parsed to float."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != SCHEMA_LINE:
            raise SchemaError(
                f"{path}:1: expected schema line {SCHEMA_LINE!r}, got {first!r}")
        header_line = fh.readline().rstrip("\n")
        if not header_line:
            raise SchemaError(f"{path}:2: missing header row")
        header = header_line.split(",")
        rows = []
        for lineno, line in enumerate(fh, start=3):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise SchemaError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(parts)}")
            rows.append([_parse(p) for p in parts])
    return header, rows


def _parse(token):
    try:
        return float(token)
    except ValueError:
        return token


def write_summary(path, summary):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"schema": SCHEMA_LINE, "summary": summary}, fh, indent=2,
                  sort_keys=True)
        fh.write("\n")


def read_summary(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema") != SCHEMA_LINE:
        raise SchemaError(f"{path}: unknown summary schema {doc.get('schema')!r}")
    return doc["summary"]
