"""CSV/JSON serialisation and flat key=value configuration files.

Every data file starts with ``#`` comment lines holding the package version
and the fully resolved run configuration, followed by an RFC 4180 style CSV
table. Reals are written with 17 significant digits so that reading a file
back reproduces the values bitwise. A JSON sidecar (``<file>.json``) repeats
the metadata in machine-readable form.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import DomainError


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _header_lines(meta: dict) -> list[str]:
    lines = [f"# kickho {__version__}"]
    for key in sorted(meta):
        lines.append(f"# {key} = {format_value(meta[key])}")
    return lines


def _json_safe(x):
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, Path):
        return str(x)
    return x


def write_series(path, columns: dict, meta: dict, sidecar: bool = True) -> Path:
    """Write equal-length columns as CSV with a provenance header.

    ``columns`` maps column names to 1-D sequences; the dict order is the
    column order.
    """
    path = Path(path)
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    lengths = {len(c) for c in cols}
    if len(lengths) > 1:
        raise DomainError(f"columns differ in length: {sorted(lengths)}", "columns")
    buf = io.StringIO(newline="")
    for line in _header_lines(meta):
        buf.write(line + "\r\n")
    w = csv.writer(buf)
    w.writerow(names)
    for row in zip(*cols):
        w.writerow([format_value(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())
    if sidecar:
        info = {
            "version": __version__,
            "config": _json_safe(meta),
            "columns": names,
            "rows": int(lengths.pop()) if lengths else 0,
        }
        Path(str(path) + ".json").write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    return path


def write_grid(path, x1, x2, values, meta: dict, names=("x1", "x2", "value"), sidecar: bool = True) -> Path:
    """Write ``values[i, j]`` at ``(x1[i], x2[j])`` as ``x1,x2,value`` triples (x2 fastest)."""
    x1 = np.asarray(x1)
    x2 = np.asarray(x2)
    values = np.asarray(values)
    if values.shape != (len(x1), len(x2)):
        raise DomainError(f"grid values have shape {values.shape}, expected {(len(x1), len(x2))}", "values")
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    meta = {**meta, "grid_shape": f"{len(x1)}x{len(x2)}"}
    return write_series(path, {names[0]: X1.ravel(), names[1]: X2.ravel(), names[2]: values.ravel()}, meta, sidecar)


def read_series(path) -> tuple[dict, dict]:
    """Inverse of :func:`write_series`: ``(meta, columns)``.

    Header values are returned as strings; numeric columns as float arrays.
    """
    meta = {}
    rows = []
    with open(path, newline="") as fh:
        body = []
        for line in fh:
            if line.startswith("#"):
                text = line[1:].strip()
                if " = " in text:
                    k, v = text.split(" = ", 1)
                    meta[k] = v
                elif text.startswith("kickho "):
                    meta["version"] = text.split(" ", 1)[1]
            else:
                body.append(line)
    rows = list(csv.reader(body))
    names = rows[0]
    data = rows[1:]
    columns = {}
    for j, name in enumerate(names):
        col = [r[j] for r in data]
        try:
            columns[name] = np.array([float(v) for v in col])
        except ValueError:
            columns[name] = np.array(col)
    return meta, columns


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}", "config")
            k, v = (s.strip() for s in line.split("=", 1))
            if not k:
                raise DomainError(f"{path}:{lineno}: empty key", "config")
            out[k.replace("-", "_")] = v
    return out
