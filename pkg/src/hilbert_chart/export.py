"""Tabular output: CSV with a ``# key=value`` header block, or JSON lines.

CSV layout::

    # key=value          (one line per header entry, in insertion order)
    col1,col2,...
    1.5,0.25,...         (numbers at ``precision`` significant digits)

JSONL layout: a ``{"header": {...}, "columns": [...]}`` line, then one
object per row. NaN is written as ``nan`` in CSV and ``null`` in JSONL.
Files are written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

TIMESTAMP_KEY = "timestamp"
DEFAULT_PRECISION = 12


@dataclass
class Table:
    columns: list[str]
    rows: list[list[float]]
    header: dict[str, str] = field(default_factory=dict)

    @property
    def precision(self) -> int:
        return int(self.header.get("precision", DEFAULT_PRECISION))


def format_number(x: float, precision: int = DEFAULT_PRECISION) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x.is_integer() and abs(x) < 10**precision:
        return str(int(x))
    return f"{x:.{precision}g}"


def to_csv(table: Table) -> str:
    buf = io.StringIO()
    for key, value in table.header.items():
        buf.write(f"# {key}={value}\n")
    buf.write(",".join(table.columns) + "\n")
    p = table.precision
    for row in table.rows:
        buf.write(",".join(format_number(v, p) for v in row) + "\n")
    return buf.getvalue()


def parse_csv(text: str) -> Table:
    header: dict[str, str] = {}
    columns: list[str] | None = None
    rows = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition("=")
            if not sep:
                raise ValueError(f"header line without '=': {line!r}")
            header[key] = value
        elif columns is None:
            columns = line.split(",")
        else:
            fields = line.split(",")
            if len(fields) != len(columns):
                raise ValueError(f"expected {len(columns)} fields, got {len(fields)}: {line!r}")
            rows.append([float(v) for v in fields])
    if columns is None:
        raise ValueError("no column header found")
    return Table(columns, rows, header)


def _json_value(x: float, precision: int):
    x = float(x)
    if not math.isfinite(x):
        return None if math.isnan(x) else format_number(x)
    return json.loads(format_number(x, precision))


def to_jsonl(table: Table) -> str:
    p = table.precision
    lines = [json.dumps({"header": table.header, "columns": table.columns})]
    for row in table.rows:
        lines.append(json.dumps({c: _json_value(v, p) for c, v in zip(table.columns, row)}))
    return "\n".join(lines) + "\n"


def parse_jsonl(text: str) -> Table:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty JSONL document")
    first = json.loads(lines[0])
    columns = first["columns"]
    rows = []
    for ln in lines[1:]:
        obj = json.loads(ln)
        rows.append([math.nan if obj[c] is None else float(obj[c]) for c in columns])
    return Table(columns, rows, dict(first["header"]))


def render(table: Table, fmt: str) -> str:
    if fmt == "csv":
        return to_csv(table)
    if fmt == "jsonl":
        return to_jsonl(table)
    raise ValueError(f"unknown format {fmt!r}")


def parse(text: str, fmt: str) -> Table:
    return parse_csv(text) if fmt == "csv" else parse_jsonl(text)


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def strip_timestamp(text: str) -> str:
    """Drop timestamp lines so two runs can be compared byte for byte."""
    out = []
    for line in text.splitlines(keepends=True):
        if line.startswith(f"# {TIMESTAMP_KEY}=") or line.startswith('{"header"'):
            if line.startswith('{"header"'):
                obj = json.loads(line)
                obj["header"].pop(TIMESTAMP_KEY, None)
                line = json.dumps(obj) + "\n"
            else:
                continue
        out.append(line)
    return "".join(out)
