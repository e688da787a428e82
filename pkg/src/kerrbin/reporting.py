"""Byte-stable CSV / JSON emission.

Numbers are written with 17 significant digits (round-trip exact for doubles),
'.' as decimal separator and LF line endings, so identical runs give identical
files on any platform.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_csv(path, columns: dict):
    """One column per key, rows aligned; all columns must have equal length."""
    path = Path(path)
    names = list(columns)
    data = [list(np.atleast_1d(columns[k])) if not isinstance(columns[k], list) else columns[k] for k in names]
    lengths = {len(col) for col in data}
    if len(lengths) > 1:
        raise ValueError(f"ragged columns: {dict(zip(names, map(len, data)))}")
    lines = [",".join(names)]
    lines.extend(",".join(fmt(v) for v in row) for row in zip(*data))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Inverse of write_csv for numeric columns (string cells are kept as-is)."""
    with open(path, encoding="utf-8") as fh:
        header, *rows = fh.read().splitlines()
    names = header.split(",")
    cols = {n: [] for n in names}
    for row in rows:
        for n, cell in zip(names, row.split(",")):
            try:
                cols[n].append(float(cell))
            except ValueError:
                cols[n].append(cell)
    return cols


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no NaN / inf
        return x if math.isfinite(x) else None
    return obj


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text + "\n")
    return path


def write_manifest(out_dir, command, config, files, gates):
    """Provenance record: the resolved config, produced files and gate verdicts."""
    from . import __version__

    record = {
        "command": command,
        "version": __version__,
        "config": config,
        "files": sorted(str(Path(f).name) for f in files),
        "gates": gates,
        "ok": all(g.get("passed", False) for g in gates.values()),
    }
    return write_json(Path(out_dir) / "manifest.json", record)
