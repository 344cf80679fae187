"""CSV time series and structured-text sidecars.

Floats are written with ``repr`` (shortest round-trip form), so a series
read back is bit-identical to the one written.
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

__all__ = ["write_series", "read_series", "write_table", "write_metadata", "read_metadata"]


def _fmt(x) -> str:
    return repr(float(x))


def write_series(path, t: np.ndarray, data: np.ndarray, names: Sequence[str]) -> Path:
    """Write ``t`` plus one column per name; header is ``t,<names>``."""
    path = Path(path)
    t = np.asarray(t, dtype=float).ravel()
    data = np.asarray(data, dtype=float).reshape(len(t), -1)
    names = list(names)
    if data.shape[1] != len(names):
        raise ValueError(f"{data.shape[1]} columns but {len(names)} names")
    if "t" in names:
        raise ValueError("'t' is reserved for the time column")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *names])
        for ti, row in zip(t, data):
            w.writerow([_fmt(ti), *map(_fmt, row)])
    return path


def read_series(path) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Inverse of :func:`write_series`: ``(t, data, names)``."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["t"]:
        raise ValueError(f"{path}: first column must be 't'")
    names = rows[0][1:]
    values = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(names) + 1)
    return values[:, 0].copy(), values[:, 1:].copy(), names


def write_table(path, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
    """Generic CSV table; floats in round-trip form, everything else via ``str``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in r])
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_metadata(path, meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(_plain(meta), sort_keys=True, default_flow_style=False))
    return path


def read_metadata(path) -> dict:
    return yaml.safe_load(Path(path).read_text()) or {}
