"""Reader for the simulator's delimited metrics files.

The format is the producer's external interface: a version line
`# aoisim-metrics v1`, a comma-separated header row, then data rows with
dot-decimal floats, UTF-8, LF line endings.
"""

SCHEMA_LINE = "# aoisim-metrics v1"


class MetricsParseError(ValueError):
    """Raised with the offending file and line in the message."""


def read_metrics(path):
    """Parse one metrics file into (header, rows of floats/strings)."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != SCHEMA_LINE:
            raise MetricsParseError(
                f"{path}:1: expected schema line {SCHEMA_LINE!r}, got {first!r}")
        header_line = fh.readline().rstrip("\n")
        if not header_line:
            raise MetricsParseError(f"{path}:2: missing header row")
        header = header_line.split(",")
        rows = []
        for lineno, line in enumerate(fh, start=3):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise MetricsParseError(
                    f"{path}:{lineno}: expected {len(header)} fields, "
                    f"got {len(parts)}")
            rows.append([_parse(p) for p in parts])
    return header, rows


def _parse(token):
    try:
        return float(token)
    except ValueError:
        return token


def column(header, rows, name, path="<metrics>"):
    """One column as a list; missing columns are a parse error."""
    try:
        i = header.index(name)
    except ValueError:
        raise MetricsParseError(
            f"{path}:2: required column {name!r} not in header {header}")
    return [row[i] for row in rows]
