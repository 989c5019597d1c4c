import csv
import json
import subprocess
import sys

import pytest

from oldroyd.cli import EXIT_CERT, EXIT_CONFIG, EXIT_OK, EXIT_SOLVE, main, parse_sweep
from oldroyd.errors import ConfigError


def run(tmp_path, *args, config=None):
    argv = [*args, "--out", str(tmp_path / "runs"), "--mesh-n", "4"]
    if config is not None:
        cfg = tmp_path / "run.cfg"
        cfg.write_text(config)
        argv += ["--config", str(cfg)]
    code = main(argv)
    dirs = sorted((tmp_path / "runs").glob(f"{args[0]}-*")) if (tmp_path / "runs").exists() else []
    return code, (dirs[-1] if dirs else None)


def test_solve_zero_forcing(tmp_path):
    code, out = run(tmp_path, "solve", config="forcing.preset = zero\n")
    assert code == EXIT_OK
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["bound_ok"] and cert["norm_x"] == 0
    assert (out / "fields.csv").exists() and (out / "config.txt").exists()


def test_solve_small_preset(tmp_path):
    code, out = run(tmp_path, "solve", config="params.we = 0.05\nparams.a = 1\nparams.re = 1\noutput.vtk = true\n")
    assert code == EXIT_OK
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["constants"]["c1"] <= 1 and cert["bound_ok"]
    assert json.loads((out / "solve_report.json").read_text())["converged"]
    assert (out / "fields.vtk").exists()


def test_bad_parameter_exit_code(tmp_path, capsys):
    code, _ = run(tmp_path, "solve", config="params.r = 1.2\n")
    assert code == EXIT_CONFIG
    assert "r must lie in (0, 1)" in capsys.readouterr().err


def test_solver_failure_exit_code(tmp_path):
    code, out = run(tmp_path, "solve",
                    config="params.re = 1\nparams.we = 0.05\nparams.a = 1\nsolver.max_iter = 1\nsolver.tol = 1e-15\n"
                           "solver.initial = random\n")
    assert code == EXIT_SOLVE
    assert not json.loads((out / "solve_report.json").read_text())["converged"]


def test_existence_failure_exit_code(tmp_path):
    code, out = run(tmp_path, "solve",
                    config="params.we = 1\nparams.a = 1\nparams.diff = 0.05\nforcing.target_norm = 0.5\n"
                           "solver.max_iter = 200\n")
    # the iteration still converges here, but no certificate can be issued
    assert code == EXIT_CERT
    cert = json.loads((out / "certificate.json").read_text())
    assert not cert["existence_ok"] and cert["constants"]["c1"] > 1


def test_certify_corotational(tmp_path):
    code, out = run(tmp_path, "certify", config="params.a = 0\nparams.we = 3\nforcing.target_norm = 50\n")
    assert code == EXIT_OK
    assert json.loads((out / "certificate.json").read_text())["existence_ok"]


def test_certify_zero_forcing_verdicts(tmp_path):
    code, out = run(tmp_path, "certify", config="forcing.preset = zero\nparams.a = 1\nparams.we = 0.5\n")
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["existence_ok"] and cert["uniqueness_ok"]


def test_certify_sweep_monotone(tmp_path):
    code, out = run(tmp_path, "certify", "--sweep", "we=0.01:1:25", config="params.a = 1\n")
    assert code == EXIT_OK
    rows = list(csv.DictReader(open(out / "region.csv")))
    assert len(rows) == 25
    flags = [r["existence_ok"] == "True" for r in rows]
    k = flags.index(False)
    assert all(flags[:k]) and not any(flags[k:])
    assert float(rows[k - 1]["c1"]) <= 1 < float(rows[k]["c1"])


def test_sweep_grid(tmp_path):
    code, out = run(tmp_path, "certify", "--sweep", "we=0:0.1:3,f=0.5:2:2")
    rows = list(csv.DictReader(open(out / "region.csv")))
    assert len(rows) == 6


@pytest.mark.parametrize("spec", ["we=1:2", "zz=0:1:3", "", "we=a:b:c"])
def test_parse_sweep_rejects(spec):
    with pytest.raises(ConfigError):
        parse_sweep(spec)


def test_bad_sweep_exit_code(tmp_path):
    assert run(tmp_path, "certify", "--sweep", "we=1:2")[0] == EXIT_CONFIG


def test_probe_zero_forcing(tmp_path):
    code, out = run(tmp_path, "probe", config="forcing.preset = zero\nparams.we = 0.05\nparams.a = 1\n")
    assert code == EXIT_OK
    rep = json.loads((out / "probe.json").read_text())
    assert rep["probe"]["max_distance"] <= 1e-12


def test_probe_small_data(tmp_path):
    code, out = run(tmp_path, "probe", config="params.we = 0.05\nparams.a = 1\nprobe.n_starts = 3\n")
    assert code == EXIT_OK
    rep = json.loads((out / "probe.json").read_text())
    assert rep["uniqueness_ok"] and rep["probe"]["within_tolerance"]


def test_mms_command(tmp_path):
    code, out = run(tmp_path, "mms", "--levels", "3", config="mms.n0 = 4\nparams.we = 0.05\nparams.a = 1\n")
    assert code == EXIT_OK
    assert (out / "rates.csv").exists()
    assert json.loads((out / "rates.json").read_text())["n"] == [4, 8, 16]


def test_levels_too_small(tmp_path):
    assert run(tmp_path, "mms", "--levels", "2")[0] == EXIT_CONFIG


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "oldroyd", "certify", "--out", str(tmp_path), "--mesh-n", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "certify-" in proc.stdout
