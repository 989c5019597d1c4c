"""Field export: CSV at P2 dof points and legacy-VTK text."""

import csv

import numpy as np

from .discretization import FunctionSpaces, State

CSV_COLUMNS = ("x", "y", "u1", "u2", "p", "s11", "s12", "s22")
VTK_QUADRATIC_TRIANGLE = 22


def pressure_at_p2_dofs(sp: FunctionSpaces, p):
    """P1 pressure evaluated at every P2 dof point (vertices, then edge midpoints)."""
    edges, _ = sp.mesh.edges()
    return np.concatenate([p, 0.5 * (p[edges[:, 0]] + p[edges[:, 1]])])


def field_table(sp: FunctionSpaces, state: State):
    u = state.u.reshape(2, sp.n2)
    s = state.s.reshape(3, sp.n2)
    return np.column_stack([sp.dof_coords, u[0], u[1], pressure_at_p2_dofs(sp, state.p), s[0], s[1], s[2]])


def write_fields_csv(path, sp: FunctionSpaces, state: State):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in field_table(sp, state).tolist():
            w.writerow([repr(v) for v in row])


def write_fields_vtk(path, sp: FunctionSpaces, state: State, title="oldroyd solution"):
    """Legacy ASCII VTK unstructured grid of quadratic triangles."""
    tab = field_table(sp, state)
    n, nt = sp.n2, sp.mesh.n_triangles
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title[:255] + "\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {n} double\n")
        for x, y in sp.dof_coords.tolist():
            fh.write(f"{x!r} {y!r} 0.0\n")
        fh.write(f"CELLS {nt} {nt * 7}\n")
        for cell in sp.cell_dofs.tolist():
            fh.write("6 " + " ".join(map(str, cell)) + "\n")
        fh.write(f"CELL_TYPES {nt}\n")
        fh.write(f"{VTK_QUADRATIC_TRIANGLE}\n" * nt)
        fh.write(f"POINT_DATA {n}\n")
        fh.write("VECTORS velocity double\n")
        for a, b in tab[:, 2:4].tolist():
            fh.write(f"{a!r} {b!r} 0.0\n")
        for k, name in enumerate(("pressure", "s11", "s12", "s22")):
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            fh.write("\n".join(repr(v) for v in tab[:, 4 + k].tolist()) + "\n")
