"""Legacy ASCII VTK export of meshes and nodal data."""
import numpy as np

_CELL_TYPES = {1: 3, 2: 5}  # VTK_LINE, VTK_TRIANGLE


def _fmt(x):
    return repr(float(x))


def vtk_text(mesh, point_data=None, title="ptcfem mesh"):
    """Render ``mesh`` (and optional nodal scalars) as a legacy VTK string.

    Vertices are written in index order, so output is byte-stable for a given
    mesh. ``point_data`` maps names to arrays of length ``mesh.n_vertices``.
    """
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    N, M, k = mesh.n_vertices, mesh.n_elements, mesh.dim + 1
    xyz = np.zeros((N, 3))
    xyz[:, :mesh.dim] = mesh.vertices
    lines.append(f"POINTS {N} double")
    lines += [" ".join(_fmt(c) for c in p) for p in xyz]
    lines.append(f"CELLS {M} {M * (k + 1)}")
    lines += [f"{k} " + " ".join(str(int(i)) for i in e) for e in mesh.elements]
    lines.append(f"CELL_TYPES {M}")
    lines += [str(_CELL_TYPES[mesh.dim])] * M
    if point_data:
        lines.append(f"POINT_DATA {N}")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (N,):
                raise ValueError(f"point data {name!r} has shape {values.shape}, expected ({N},)")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_fmt(v) for v in values]
    return "\n".join(lines) + "\n"


def write_vtk(path, mesh, point_data=None, title="ptcfem mesh"):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(vtk_text(mesh, point_data, title))


def read_vtk(path):
    """Parse a file written by :func:`write_vtk`.

    Returns ``(points, cells, point_data)`` with ``points`` of shape (N, 3).
    """
    with open(path, encoding="ascii") as fh:
        tokens = fh.read().split("\n")
    i = 4
    n = int(tokens[i].split()[1])
    points = np.array([[float(v) for v in tokens[i + 1 + j].split()] for j in range(n)])
    i += n + 1
    m = int(tokens[i].split()[1])
    cells = np.array([[int(v) for v in tokens[i + 1 + j].split()[1:]] for j in range(m)])
    i += m + 1 + m + 1
    data = {}
    if i < len(tokens) and tokens[i].startswith("POINT_DATA"):
        i += 1
        while i < len(tokens) and tokens[i].startswith("SCALARS"):
            name = tokens[i].split()[1]
            data[name] = np.array([float(tokens[i + 2 + j]) for j in range(n)])
            i += 2 + n
    return points, cells, data
