"""Deterministic CSV writing for run outputs.

Floats are rendered with Python's shortest round-trip repr so files are
bitwise reproducible across runs and parse back to the exact same doubles.
"""

from __future__ import annotations

import csv
import io


def format_value(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(x) for x in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(render_csv(header, rows))


def read_csv(path):
    """Read back a CSV written by write_csv: (header, list of string rows)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def read_numeric_csv(path):
    """Read a CSV of floats: (header, 2-D float array as list of lists)."""
    header, rows = read_csv(path)
    return header, [[float(x) for x in row] for row in rows]
