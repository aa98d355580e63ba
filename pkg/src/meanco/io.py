"""Serialisation: 17-significant-digit JSON, solution files, CSV and legacy VTK."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = f"{x:.17g}"
    if "e" not in s and "." not in s and "inf" not in s and "nan" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits and sorted keys."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}{_string(str(k))}: {dumps(v, indent, _level + 1)}' for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj.tolist() if isinstance(obj, np.ndarray) else obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in seq):
            return "[" + ", ".join(dumps(v) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return _string(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _string(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt_float(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def write_vtk(path, mesh, u, det) -> None:
    """Legacy ASCII unstructured grid with cell scalar "detgrad" and point vectors "u"."""
    n = mesh.n_nodes
    m = mesh.n_elements
    lines = ["# vtk DataFile Version 3.0", "meanco P1 solution", "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {n} double"]
    lines += [f"{_fmt_float(x)} {_fmt_float(y)} 0.0" for x, y in mesh.nodes]
    lines.append(f"CELLS {m} {4 * m}")
    lines += [f"3 {i} {j} {k}" for i, j, k in mesh.elements]
    lines.append(f"CELL_TYPES {m}")
    lines += ["5"] * m
    lines += [f"CELL_DATA {m}", "SCALARS detgrad double 1", "LOOKUP_TABLE default"]
    lines += [_fmt_float(float(d)) for d in det]
    lines += [f"POINT_DATA {n}", "VECTORS u double"]
    lines += [f"{_fmt_float(float(u[i]))} {_fmt_float(float(u[n + i]))} 0.0" for i in range(n)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
