"""Field and report output: CSV, legacy VTK, atomic file writes."""

from __future__ import annotations

import csv
import os
import tempfile
from pathlib import Path

import numpy as np

from .fields import GridSpec, ScalarField, VectorField

__all__ = ["write_text_atomic", "write_field", "read_field_csv", "field_to_csv", "field_to_vtk"]


def write_text_atomic(path, text: str) -> Path:
    """Write ``text`` to a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _columns(field):
    g = field.grid
    X, Y = g.mesh
    # x varies fastest
    cols = [g.ravel(X), g.ravel(Y)]
    if isinstance(field, VectorField):
        return ["x", "y", "vx", "vy"], cols + [g.ravel(field.vx), g.ravel(field.vy)]
    return ["x", "y", "value"], cols + [g.ravel(field.values)]


def field_to_csv(field) -> str:
    """CSV text with header ``x,y,value`` or ``x,y,vx,vy`` and 17 significant digits."""
    header, cols = _columns(field)
    data = np.column_stack(cols)
    lines = [",".join(header)]
    lines += [",".join(f"{v:.17g}" for v in row) for row in data]
    return "\n".join(lines) + "\n"


def field_to_vtk(field, name: str = "field") -> str:
    """Legacy ASCII VTK ``STRUCTURED_POINTS`` text."""
    g = field.grid
    out = [
        "# vtk DataFile Version 3.0",
        f"micropolar {name}",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {g.nx} {g.ny} 1",
        "ORIGIN 0 0 0",
        f"SPACING {g.h:.17g} {g.h:.17g} 1",
        f"POINT_DATA {g.size}",
    ]
    if isinstance(field, VectorField):
        out.append(f"VECTORS {name} double")
        out += [f"{a:.17g} {b:.17g} 0" for a, b in zip(g.ravel(field.vx), g.ravel(field.vy))]
    else:
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [f"{a:.17g}" for a in g.ravel(field.values)]
    return "\n".join(out) + "\n"


def write_field(field, fmt: str, path, name: str | None = None) -> Path:
    """Write ``field`` as ``csv`` or ``vtk``; I/O errors name the path."""
    path = Path(path)
    if fmt == "csv":
        text = field_to_csv(field)
    elif fmt == "vtk":
        text = field_to_vtk(field, name or path.stem)
    else:
        raise ValueError(f"unknown field format {fmt!r}")
    try:
        return write_text_atomic(path, text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_field_csv(path, lx: float | None = None, ly: float | None = None):
    """Read a field written by ``write_field``; the grid is inferred from the nodes."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(c) for c in r] for r in rows[1:]])
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    grid = GridSpec(len(xs), len(ys), lx if lx is not None else float(xs[-1]),
                    ly if ly is not None else float(ys[-1]))
    if header == ["x", "y", "vx", "vy"]:
        return VectorField(grid, grid.unravel(data[:, 2]), grid.unravel(data[:, 3]))
    if header == ["x", "y", "value"]:
        return ScalarField(grid, grid.unravel(data[:, 2]))
    raise ValueError(f"{path}: unexpected header {header}")
