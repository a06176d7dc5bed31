"""Deterministic CSV/JSON emission with atomic writes."""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write(path, text: str) -> Path:
    """Write ``text`` to a temporary file next to ``path`` and rename it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows) -> Path:
    return atomic_write(path, csv_text(header, rows))


def to_jsonable(obj):
    """Plain Python types; non-finite floats become the strings
    ``"inf"``, ``"-inf"`` and ``"nan"``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def json_text(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, json_text(obj))


class CSVFormatError(ValueError):
    pass


def read_node_csv(path, n_nodes: int, column: str | None = None) -> np.ndarray:
    """Per-node values from a CSV with a ``node_index`` column.

    The value column is ``column`` if given, otherwise the last column.
    Every node must appear exactly once.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "node_index" not in reader.fieldnames:
                raise CSVFormatError(f"{path}: missing node_index column")
            col = column or reader.fieldnames[-1]
            if col not in reader.fieldnames or col == "node_index":
                raise CSVFormatError(f"{path}: no value column {col!r}")
            out = np.full(n_nodes, np.nan)
            for lineno, row in enumerate(reader, start=2):
                try:
                    i = int(row["node_index"])
                    v = float(row[col])
                except (TypeError, ValueError) as exc:
                    raise CSVFormatError(f"{path}:{lineno}: {exc}") from None
                if not 0 <= i < n_nodes:
                    raise CSVFormatError(f"{path}:{lineno}: node_index {i} out of range")
                if not np.isnan(out[i]):
                    raise CSVFormatError(f"{path}:{lineno}: duplicate node_index {i}")
                if not math.isfinite(v):
                    raise CSVFormatError(f"{path}:{lineno}: non-finite value")
                out[i] = v
    except OSError as exc:
        raise CSVFormatError(f"cannot read {path}: {exc}") from None
    if np.any(np.isnan(out)):
        missing = int(np.argmax(np.isnan(out)))
        raise CSVFormatError(f"{path}: node {missing} missing")
    return out
