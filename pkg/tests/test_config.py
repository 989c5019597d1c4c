import pytest

from oldroyd.config import (
    FORCING_PRESETS, ForcingConfig, RunConfig, build_forcing, dump_config, load_config, parse_config,
)
from oldroyd.errors import ConfigError
from oldroyd.mesh import unit_square_mesh, write_mesh


def test_defaults_validate():
    cfg = RunConfig().validate()
    assert cfg.forcing.effective_target() == 0.1


def test_roundtrip():
    text = """
    # a comment
    params.re = 1
    params.we = 0.05   # trailing comment
    params.a = -0.5
    forcing.expr1 = sin(pi*y)
    forcing.expr2 = 0
    mesh.n = 12
    solver.scheme = decoupled
    solver.relaxation = 0.7
    output.vtk = true
    seed = 9
    """
    cfg = parse_config(text)
    assert cfg.params.we == 0.05 and cfg.params.a == -0.5
    assert cfg.solver.scheme == "decoupled" and cfg.output.vtk and cfg.seed == 9
    assert cfg.forcing.effective_target() is None
    back = parse_config(dump_config(cfg))
    assert back == cfg


@pytest.mark.parametrize("text", [
    "params.r = 1.2", "params.bogus = 1", "nosection = 3", "mesh.n = two", "mesh.n = 0",
    "solver.scheme = newton", "forcing.preset = wobble", "forcing.expr1 = sin(", "output.csv = maybe",
    "just words", "mms.reference = spline", "mesh.file = missing.msh",
])
def test_rejections(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.cfg")


def test_mesh_file_relative_to_config(tmp_path):
    write_mesh(unit_square_mesh(2), tmp_path / "m.txt")
    (tmp_path / "run.cfg").write_text("mesh.file = m.txt\n")
    cfg = load_config(tmp_path / "run.cfg")
    assert cfg.mesh.file == str(tmp_path / "m.txt")


def test_build_forcing():
    f = build_forcing(ForcingConfig(preset=None, expr1="x", expr2="2*y", scale=3.0))
    a, b = f(1.0, 2.0)
    assert a == 3.0 and b == 12.0
    for name in FORCING_PRESETS:
        build_forcing(ForcingConfig(preset=name))(0.3, 0.4)
