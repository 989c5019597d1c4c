import csv

import numpy as np

from oldroyd.discretization import FunctionSpaces, random_state
from oldroyd.export import CSV_COLUMNS, pressure_at_p2_dofs, write_fields_csv, write_fields_vtk
from oldroyd.mesh import unit_square_mesh


def test_csv_and_vtk(tmp_path):
    sp = FunctionSpaces(unit_square_mesh(2))
    st = random_state(sp, np.random.default_rng(0))
    st.p = sp.interpolate_pressure(lambda x, y: x - y)
    write_fields_csv(tmp_path / "f.csv", sp, st)
    rows = list(csv.reader(open(tmp_path / "f.csv")))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == sp.n2 + 1
    data = np.array(rows[1:], dtype=float)
    assert np.allclose(data[:, 2], st.u[: sp.n2])
    # a linear pressure is exact at edge midpoints
    assert np.allclose(data[:, 4], data[:, 0] - data[:, 1])

    write_fields_vtk(tmp_path / "f.vtk", sp, st)
    text = (tmp_path / "f.vtk").read_text()
    assert text.startswith("# vtk DataFile Version 3.0")
    assert f"CELLS {sp.mesh.n_triangles} {7 * sp.mesh.n_triangles}" in text
    assert text.count("LOOKUP_TABLE") == 4


def test_pressure_at_dofs():
    sp = FunctionSpaces(unit_square_mesh(1))
    assert np.allclose(pressure_at_p2_dofs(sp, np.ones(4)), 1.0)
