"""
File emission: legacy VTK, CSV, key-value reports and Matrix Market dumps.

Numbers are written with a fixed format so identical inputs give
byte-identical files.
"""

import csv
import logging
import os

import numpy as np
import scipy.io

logger = logging.getLogger(__name__)

VTK_TETRA = 10
FLOAT_FORMAT = "{:.12e}"


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT.format(float(value))
    return str(value)


def _ensure_parent(path):
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)


def write_vtk(path, mesh, point_data=None, cell_data=None, title="micromorphic"):
    """Write an ASCII legacy VTK unstructured grid of tetrahedra.

    Args:
        path: output file
        mesh: Mesh
        point_data: {name: (nv,) scalars or (nv, 3) vectors}
        cell_data: {name: (nc,) scalars or (nc, 3) vectors}
        title: header comment line
    """
    _ensure_parent(path)
    point_data = point_data or {}
    cell_data = cell_data or {}
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_vertices} double")
    lines.extend(" ".join(_fmt(c) for c in xyz) for xyz in mesh.vertices)
    lines.append(f"CELLS {mesh.n_cells} {5 * mesh.n_cells}")
    lines.extend("4 " + " ".join(str(int(v)) for v in cell) for cell in mesh.cells)
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines.extend(str(VTK_TETRA) for _ in range(mesh.n_cells))
    for header, count, data in (("POINT_DATA", mesh.n_vertices, point_data), ("CELL_DATA", mesh.n_cells, cell_data)):
        if not data:
            continue
        lines.append(f"{header} {count}")
        for name, values in data.items():
            values = np.asarray(values, dtype=float)
            if values.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(_fmt(v) for v in values)
            else:
                lines.append(f"VECTORS {name} double")
                lines.extend(" ".join(_fmt(c) for c in row) for row in values)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    logger.debug("Wrote VTK %s", path)
    return path


def write_csv(path, header, rows):
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    logger.debug("Wrote CSV %s", path)
    return path


def write_report(path, values, comments=()):
    """Key-value report, `name = value` one per line, in insertion order."""
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for comment in comments:
            f.write(f"# {comment}\n")
        for key, value in values.items():
            f.write(f"{key} = {_fmt(value)}\n")
    logger.debug("Wrote report %s", path)
    return path


def write_matrix_market(path, matrix, comment=""):
    _ensure_parent(path)
    scipy.io.mmwrite(path, matrix.tocoo(), comment=comment, field="real", symmetry="general")
    return path
