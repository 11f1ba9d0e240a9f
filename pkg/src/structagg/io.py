"""Reading data/structure files and writing results."""
from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .core import Dataset


def _parse_row(row):
    try:
        return [float(v) for v in row]
    except ValueError:
        return None


def read_csv(path, response=None, sigma2=None):
    """Load a dataset from CSV.

    The header row is optional (detected by whether the first row parses as
    numbers).  ``response`` is a column name, a 1-based column number, or
    ``None`` for the last column.  Returns ``(dataset, covariate_names)``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"data file not found: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    header = None
    if _parse_row(rows[0]) is None:
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    width = len(header) if header else len(rows[0])
    values = []
    for lineno, r in enumerate(rows, start=2 if header else 1):
        if len(r) != width:
            raise ValueError(f"{path}:{lineno}: expected {width} fields, got {len(r)}")
        parsed = _parse_row(r)
        if parsed is None:
            raise ValueError(f"{path}:{lineno}: non-numeric value")
        if not all(math.isfinite(v) for v in parsed):
            raise ValueError(f"{path}:{lineno}: NaN or infinite value")
        values.append(parsed)
    A = np.array(values, dtype=float)
    names = header or [f"x{i + 1}" for i in range(width)]
    if response is None:
        col = width - 1
    elif header and str(response) in header:
        col = header.index(str(response))
    else:
        try:
            col = int(response) - 1
        except ValueError:
            raise ValueError(f"{path}: no column named {response!r}") from None
        if not 0 <= col < width:
            raise ValueError(f"{path}: response column {response} out of range")
    if width < 2:
        raise ValueError(f"{path}: need a response and at least one covariate")
    keep = [j for j in range(width) if j != col]
    return Dataset(A[:, col], A[:, keep], sigma2), [names[j] for j in keep]


def write_csv(path, X, y, names=None, response="y"):
    names = names or [f"x{i + 1}" for i in range(X.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + [response])
        for row, v in zip(X, y):
            w.writerow([repr(float(a)) for a in row] + [repr(float(v))])


def load_json(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: invalid JSON ({e})") from None


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, default=_default)


def write_json(path, obj):
    Path(path).write_text(dumps(obj) + "\n")


def write_trace(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "size", "error", "accepted"])
        for t, k, err, ok in trace:
            w.writerow([t, k, repr(float(err)), int(ok)])


def read_vector(path):
    """A coefficient vector from JSON (list, or object with ``beta``) or one-column CSV."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        obj = load_json(path)
        if isinstance(obj, dict):
            obj = obj.get("beta")
        if not isinstance(obj, list):
            raise ValueError(f"{path}: expected a list or an object with 'beta'")
        return np.array(obj, dtype=float)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    vals = []
    with open(path, newline="") as fh:
        for r in csv.reader(fh):
            if r and _parse_row(r[:1]) is not None:
                vals.append(float(r[0]))
    return np.array(vals)


def demo_paths():
    """Paths of the bundled demo dataset and its cluster penalty file."""
    base = resources.files("structagg") / "data"
    return Path(str(base / "demo.csv")), Path(str(base / "demo_clusters.json"))
