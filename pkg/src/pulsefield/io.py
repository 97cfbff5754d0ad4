"""Atomic CSV/JSON writers.

CSV files are comma separated with LF line endings.  Floats are printed with
17 significant digits so every float64 survives a text round trip.
"""
from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np


def _atomic_write(path: Path, data: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def _as_column(col) -> tuple[str, np.ndarray]:
    arr = np.asarray(col)
    if arr.dtype.kind in "iub":
        return "%d", arr.astype(np.int64)
    if arr.dtype.kind == "f":
        return "%.17g", arr.astype(np.float64)
    raise TypeError(f"unsupported column dtype {arr.dtype}")


def format_csv(header, columns) -> str:
    header = list(header)
    if len(columns) != len(header):
        raise ValueError("header and columns differ in length")
    cols = [_as_column(c) for c in columns]
    n = cols[0][1].size if cols else 0
    if any(c.size != n for _, c in cols):
        raise ValueError("columns differ in length")
    row = ",".join(f for f, _ in cols) + "\n"
    # one C-level formatting pass over the interleaved values
    if all(f == "%.17g" for f, _ in cols):
        flat = np.column_stack([c for _, c in cols]).ravel().tolist() if cols else []
    else:
        table = np.empty((n, len(cols)), dtype=object)
        for i, (_, c) in enumerate(cols):
            table[:, i] = c.tolist()
        flat = table.ravel().tolist()
    return ",".join(header) + "\n" + (row * n) % tuple(flat)


def write_csv(path, header, columns) -> Path:
    """Write equal-length ``columns`` under ``header``; the file appears atomically."""
    path = Path(path)
    _atomic_write(path, format_csv(header, columns))
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    """Read a file produced by :func:`write_csv` into float arrays keyed by header."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not body:
        return {h: np.empty(0) for h in header}
    data = np.array(body, dtype=np.float64)
    return {h: data[:, i] for i, h in enumerate(header)}


def write_json(path, payload) -> Path:
    path = Path(path)
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def write_text(path, text: str) -> Path:
    path = Path(path)
    _atomic_write(path, text)
    return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
