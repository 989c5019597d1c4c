"""Command-line driver: ``oldroyd {solve,certify,mms,probe}``.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 certificate violation. ``OLDROYD_THREADS`` sets the number of worker
threads for multi-start probes and MMS levels.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import itertools
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .certificates import certify, energy_certificate, sobolev_constant
from .config import RunConfig, build_forcing, dump_config, load_config, scaled_forcing
from .discretization import FunctionSpaces, h_minus1_norm
from .errors import (
    C1ExceedsOneError, ConfigError, LinearSolveFailure, MeshError, NoConvergence, ParameterError,
    SolveFailed, SolverError,
)
from .export import write_fields_csv, write_fields_vtk
from .mesh import read_mesh, refine_uniform, unit_square_mesh
from .model import compute_constants
from .solver import solve_picard
from .verification import convergence_study, default_benchmark, multistart_uniqueness_probe

log = logging.getLogger("oldroyd")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVE, EXIT_CERT = 0, 2, 3, 4
SWEEP_KEYS = ("re", "we", "a", "diff", "r", "f")


def n_threads() -> int:
    try:
        return max(1, int(os.environ.get("OLDROYD_THREADS", "1")))
    except ValueError:
        return 1


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def write_json(path, obj):
    def clean(x):
        if isinstance(x, float) and not math.isfinite(x):
            return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        return x

    Path(path).write_text(json.dumps(clean(obj), indent=2, default=_json_default) + "\n", encoding="utf-8")


def run_directory(out: str, command: str) -> Path:
    stamp = dt.datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    base = Path(out) / f"{command}-{stamp}"
    path, k = base, 1
    while path.exists():
        path = base.with_name(f"{base.name}-{k}")
        k += 1
    path.mkdir(parents=True)
    return path


def build_spaces(cfg: RunConfig) -> FunctionSpaces:
    mesh = read_mesh(cfg.mesh.file) if cfg.mesh.file else unit_square_mesh(cfg.mesh.n)
    for _ in range(cfg.mesh.refine):
        mesh = refine_uniform(mesh)
    return FunctionSpaces(mesh)


def build_problem_forcing(cfg: RunConfig, sp: FunctionSpaces):
    """Configured forcing, rescaled to the target H^-1 norm when one is set."""
    f = build_forcing(cfg.forcing)
    target = cfg.forcing.effective_target()
    norm = h_minus1_norm(f, sp)
    if target is not None and norm > 0:
        f = scaled_forcing(f, target / norm)
        norm = h_minus1_norm(f, sp)
    return f, norm


def cmd_solve(cfg: RunConfig, outdir: Path) -> int:
    sp = build_spaces(cfg)
    f, f_norm = build_problem_forcing(cfg, sp)
    sob = sobolev_constant(sp, n_restarts=cfg.certify.c_omega_restarts, seed=cfg.seed)
    consts = compute_constants(cfg.params, sob.value, f_norm)
    solver_opts = dataclasses.replace(cfg.solver, seed=cfg.seed)
    try:
        state, report = solve_picard(cfg.params, f, sp, solver_opts, c1=consts.c1, c2=consts.c2)
    except SolverError as exc:
        if exc.report is not None:
            write_json(outdir / "solve_report.json", exc.report.to_dict())
        raise
    write_json(outdir / "solve_report.json", report.to_dict())
    if cfg.output.csv:
        write_fields_csv(outdir / "fields.csv", sp, state)
    if cfg.output.vtk:
        write_fields_vtk(outdir / "fields.vtk", sp, state)
    try:
        cert = energy_certificate(sp, state, cfg.params, f, sob.value, f_norm, seed=cfg.seed)
    except C1ExceedsOneError as exc:
        write_json(outdir / "certificate.json", certify(sp, cfg.params, f, sob.value, f_norm, cfg.seed).to_dict())
        log.error("%s", exc)
        return EXIT_CERT
    cert.notes.append(f"c_omega audit max ratio {sob.audit_max_ratio:.6g}")
    write_json(outdir / "certificate.json", cert.to_dict())
    log.info("solve: %d iterations, ||xi||_X = %.6g, C_II,h = %.6g, bound_ok = %s",
             report.iterations, cert.norm_x, cert.constants.c2, cert.bound_ok)
    return EXIT_OK if cert.bound_ok else EXIT_CERT


def parse_sweep(text: str) -> dict:
    """``"we=0.01:0.2:20,re=0:1:3"`` -> ``{"we": array, "re": array}``."""
    out = {}
    for part in filter(None, (s.strip() for s in text.split(","))):
        try:
            key, rng = part.split("=")
            start, stop, count = rng.split(":")
            key = key.strip()
            if key not in SWEEP_KEYS:
                raise ValueError(f"unknown sweep key {key!r}")
            out[key] = np.linspace(float(start), float(stop), int(count))
        except ValueError as exc:
            raise ConfigError(f"bad sweep spec {part!r}: {exc}") from exc
    if not out:
        raise ConfigError("empty sweep spec")
    return out


SWEEP_COLUMNS = ("re", "we", "a", "diff", "r", "f_scale", "f_norm", "c1", "c2",
                 "existence_ok", "uniqueness_ok", "a_coef", "b_coef")


def certify_sweep(cfg: RunConfig, sweep: dict, c_omega: float, f_norm: float):
    keys = list(sweep)
    rows = []
    for combo in itertools.product(*(sweep[k] for k in keys)):
        setting = dict(zip(keys, map(float, combo)))
        f_scale = setting.pop("f", 1.0)
        try:
            p = cfg.params.replace(**setting)
        except ParameterError as exc:
            raise ConfigError(f"sweep point {setting}: {exc}") from exc
        c = compute_constants(p, c_omega, f_scale * f_norm)
        uniq = c.existence_ok and c.a_coef > 0 and c.b_coef > 0
        rows.append((p.re, p.we, p.a, p.diff, p.r, f_scale, f_scale * f_norm, c.c1, c.c2,
                     c.existence_ok, uniq, c.a_coef, c.b_coef))
    return rows


def cmd_certify(cfg: RunConfig, outdir: Path) -> int:
    sp = build_spaces(cfg)
    f, f_norm = build_problem_forcing(cfg, sp)
    sob = sobolev_constant(sp, n_restarts=cfg.certify.c_omega_restarts, seed=cfg.seed)
    cert = certify(sp, cfg.params, f, sob.value, f_norm, cfg.seed)
    cert.notes.append(f"c_omega audit max ratio {sob.audit_max_ratio:.6g}")
    write_json(outdir / "certificate.json", cert.to_dict())
    if cfg.certify.sweep:
        rows = certify_sweep(cfg, parse_sweep(cfg.certify.sweep), sob.value, f_norm)
        with open(outdir / "region.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(SWEEP_COLUMNS)
            w.writerows(rows)
    log.info("certify: C_I,h = %.6g existence_ok = %s uniqueness_ok = %s",
             cert.constants.c1, cert.existence_ok, cert.uniqueness_ok)
    return EXIT_OK


def cmd_mms(cfg: RunConfig, outdir: Path) -> int:
    ms = default_benchmark(cfg.mms.velocity_scale, cfg.mms.stress_scale)
    table = convergence_study(ms, cfg.params, cfg.mms.levels, cfg.mms.n0, cfg.solver,
                              reference=cfg.mms.reference, workers=n_threads())
    table.write_csv(outdir / "rates.csv")
    write_json(outdir / "rates.json", table.to_dict())
    worst = min(table.min_rates())
    log.info("mms: minimum observed order %.3f", worst)
    return EXIT_OK if worst >= cfg.mms.min_order else EXIT_CERT


def cmd_probe(cfg: RunConfig, outdir: Path) -> int:
    sp = build_spaces(cfg)
    f, f_norm = build_problem_forcing(cfg, sp)
    sob = sobolev_constant(sp, n_restarts=cfg.certify.c_omega_restarts, seed=cfg.seed)
    cert = certify(sp, cfg.params, f, sob.value, f_norm, cfg.seed)
    radius = cert.constants.c2 if cert.existence_ok and cert.constants.c2 else 1.0
    rel_tol = cfg.probe.rel_tol if f_norm > 0 else 1e-12
    rep = multistart_uniqueness_probe(cfg.params, f, sp, cfg.probe.n_starts, cfg.seed, radius, cfg.solver,
                                      rel_tol=rel_tol, workers=n_threads())
    out = {"probe": rep.to_dict(), "uniqueness_ok": cert.uniqueness_ok, "certificate": cert.to_dict()}
    write_json(outdir / "probe.json", out)
    log.info("probe: max pairwise distance %.3e (uniqueness_ok=%s)", rep.max_distance, cert.uniqueness_ok)
    if cert.uniqueness_ok and not rep.within_tolerance:
        return EXIT_CERT
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "certify": cmd_certify, "mms": cmd_mms, "probe": cmd_probe}


def build_parser():
    ap = argparse.ArgumentParser(prog="oldroyd", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="config file (dotted keys)")
    ap.add_argument("--out", help="output root directory (overrides output.dir)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--mesh-n", type=int, dest="mesh_n")
    ap.add_argument("--levels", type=int)
    ap.add_argument("--sweep", help='e.g. "we=0.01:0.2:20" (comma-separated for a grid)')
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig().validate()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.mesh_n is not None:
            if args.mesh_n < 1:
                raise ConfigError("--mesh-n must be >= 1")
            cfg.mesh.n, cfg.mesh.file = args.mesh_n, None
        if args.levels is not None:
            if args.levels < 3:
                raise ConfigError("--levels must be >= 3")
            cfg.mms.levels = args.levels
        if args.sweep is not None:
            parse_sweep(args.sweep)
            cfg.certify.sweep = args.sweep
        if args.out is not None:
            cfg.output.dir = args.out
        outdir = run_directory(cfg.output.dir, args.command)
        (outdir / "config.txt").write_text(dump_config(cfg), encoding="utf-8")
        code = COMMANDS[args.command](cfg, outdir)
    except (ConfigError, ParameterError, MeshError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, LinearSolveFailure, SolveFailed, NoConvergence) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVE
    print(outdir)
    return code


if __name__ == "__main__":
    sys.exit(main())
