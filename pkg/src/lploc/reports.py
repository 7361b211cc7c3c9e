"""Report serialization: JSON documents, CSV tables, two-column plot data.

All writers are canonical (sorted keys, fixed separators, shortest-repr
floats) so that parsing a file and writing it back reproduces it byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__


def _default(obj):
    if isinstance(obj, Fraction):
        return {"exact": f"{obj.numerator}/{obj.denominator}", "decimal": float(obj)}
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_default) + "\n"


def write_json(path, doc) -> Path:
    path = Path(path)
    path.write_text(dumps(doc))
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def envelope(command: str, config: dict, seeds: dict, passed: bool, result: dict) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config": config,
        "seeds": seeds,
        "passed": bool(passed),
        "result": result,
    }


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([row[h] for h in header] if isinstance(row, dict) else list(row))
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.write_text(csv_text(header, rows))
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_plot_data(path, x, y, xlabel: str, ylabel: str) -> Path:
    path = Path(path)
    lines = [f"# {xlabel} {ylabel}"]
    lines += [f"{float(a)!r} {float(b)!r}" for a, b in zip(x, y)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_plot_data(path) -> tuple[list[str], np.ndarray]:
    text = Path(path).read_text().splitlines()
    labels = text[0].lstrip("# ").split()
    data = np.array([[float(v) for v in line.split()] for line in text[1:]]).reshape(-1, 2)
    return labels, data
