"""Manufactured solutions, convergence studies and the multi-start uniqueness probe."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np
import sympy as sp_

from .discretization import FunctionSpaces, State, norm_V, norm_X, random_state
from .errors import SolveFailed, SolverError
from .mesh import unit_square_mesh
from .model import FluidParams
from .solver import SolverOptions, solve_picard

log = logging.getLogger(__name__)

X, Y = sp_.symbols("x y", real=True)


@dataclass(frozen=True)
class ManufacturedSolution:
    """Closed-form ``(u*, p*, sigma*)`` with ``u* = (d psi/dy, -d psi/dx)``.

    Fields are sympy expressions in ``x``, ``y``; ``stress`` holds
    ``(s11, s12, s22)``.
    """

    psi: sp_.Expr | None
    pressure: sp_.Expr
    stress: tuple
    velocity_override: tuple | None = None

    @property
    def velocity(self):
        if self.velocity_override is not None:
            return tuple(self.velocity_override)
        return (sp_.diff(self.psi, Y), -sp_.diff(self.psi, X))

    def check_invariants(self, tol=1e-12):
        u1, u2 = self.velocity
        if sp_.simplify(sp_.diff(u1, X) + sp_.diff(u2, Y)) != 0:
            raise ValueError("manufactured velocity is not divergence free")
        t = sp_.symbols("t")
        for edge in ((t, 0), (t, 1), (0, t), (1, t)):
            for c in (u1, u2):
                if sp_.simplify(c.subs({X: edge[0], Y: edge[1]})) != 0:
                    raise ValueError("manufactured velocity does not vanish on the boundary")
        mean = sp_.integrate(self.pressure, (X, 0, 1), (Y, 0, 1))
        if abs(float(mean)) > tol:
            raise ValueError("manufactured pressure is not zero-mean")

    def callables(self):
        lam = lambda exprs: _vector_lambdify(exprs)
        return lam(self.velocity), lam((self.pressure,)), lam(self.stress)


def _vector_lambdify(exprs):
    fns = [sp_.lambdify((X, Y), e, "numpy") for e in exprs]

    def call(x, y):
        x = np.asarray(x, dtype=float)
        return tuple(np.broadcast_to(np.asarray(fn(x, y), dtype=float), np.shape(x)) for fn in fns)

    return call


def default_benchmark(velocity_scale=1.0, stress_scale=1.0) -> ManufacturedSolution:
    """Stream-function velocity, trigonometric pressure, cosine stresses.

    The stresses use cosines so that their normal derivative vanishes on the
    unit-square boundary (the natural condition of the stress equation).
    """
    psi = velocity_scale * X**2 * (1 - X) ** 2 * Y**2 * (1 - Y) ** 2
    pi = sp_.pi
    pressure = velocity_scale * sp_.sin(pi * X) * sp_.cos(pi * Y)
    stress = (
        stress_scale * sp_.cos(pi * X) * sp_.cos(pi * Y),
        stress_scale * sp_.cos(pi * X) * sp_.cos(2 * pi * Y) / 2,
        stress_scale * sp_.cos(2 * pi * X) * sp_.cos(pi * Y),
    )
    return ManufacturedSolution(psi, pressure, stress)


def _sym_matrix(s):
    return sp_.Matrix([[s[0], s[1]], [s[1], s[2]]])


def strong_form_symbolic(ms: ManufacturedSolution, p: FluidParams):
    """Symbolic forcings ``f`` (momentum) and ``g`` (extra stress source)."""
    u = sp_.Matrix(ms.velocity)
    S = _sym_matrix(ms.stress)
    grad_u = sp_.Matrix([[sp_.diff(u[i], v) for v in (X, Y)] for i in range(2)])
    D = (grad_u + grad_u.T) / 2
    W = (grad_u - grad_u.T) / 2
    conv = grad_u * u
    lap_u = sp_.Matrix([sp_.diff(u[i], X, 2) + sp_.diff(u[i], Y, 2) for i in range(2)])
    grad_p = sp_.Matrix([sp_.diff(ms.pressure, X), sp_.diff(ms.pressure, Y)])
    div_s = sp_.Matrix([sp_.diff(S[i, 0], X) + sp_.diff(S[i, 1], Y) for i in range(2)])
    f = p.re * conv - (1 - p.r) * lap_u + grad_p - div_s

    transport = S.applyfunc(lambda c: u[0] * sp_.diff(c, X) + u[1] * sp_.diff(c, Y))
    ga = W * S - S * W + p.a * (D * S + S * D)
    lap_s = S.applyfunc(lambda c: sp_.diff(c, X, 2) + sp_.diff(c, Y, 2))
    g = p.we * (transport + ga) + S - p.diff * lap_s - 2 * p.r * D
    return tuple(f), (g[0, 0], g[0, 1], g[1, 1])


def mms_forcing(ms: ManufacturedSolution, p: FluidParams):
    """Callables ``f(x, y) -> (f1, f2)`` and ``g(x, y) -> (g11, g12, g22)``."""
    f, g = strong_form_symbolic(ms, p)
    return _vector_lambdify(f), _vector_lambdify(g)


# --- errors and convergence ------------------------------------------------------------

def interpolate_solution(ms: ManufacturedSolution, sp: FunctionSpaces) -> State:
    uf, pf, sf = ms.callables()
    u = sp.interpolate_velocity(uf)
    u[sp.vel_boundary_mask] = 0.0
    p = sp.interpolate_pressure(lambda x, y: pf(x, y)[0])
    m = sp.pressure_mean_vector
    p = p - (m @ p) / m.sum()
    return State(u, p, sp.interpolate_stress(sf))


def error_norms(state: State, ms: ManufacturedSolution, sp: FunctionSpaces):
    """``(u H1-seminorm error, p L2 error, sigma W error)`` against the interpolant."""
    ref = interpolate_solution(ms, sp)
    d = state - ref
    m = sp.pressure_mean_vector
    dp = d.p - (m @ d.p) / m.sum()
    p_err = math.sqrt(max(dp @ (sp.pressure_mass @ dp), 0.0))
    return norm_V(sp, d.u), p_err, math.sqrt(max(d.s @ (sp.stress_gram @ d.s), 0.0))


def exact_error_norms(state: State, ms: ManufacturedSolution, sp: FunctionSpaces):
    """Same as :func:`error_norms` but against the closed-form fields by quadrature."""
    u = sp_.Matrix(ms.velocity)
    grad_u = _vector_lambdify([sp_.diff(u[i], v) for i in range(2) for v in (X, Y)])
    s_exprs = ms.stress
    s_fn = _vector_lambdify(s_exprs)
    grad_s = _vector_lambdify([sp_.diff(c, v) for c in s_exprs for v in (X, Y)])
    p_fn = _vector_lambdify((ms.pressure,))
    x, y = sp.qpts[..., 0], sp.qpts[..., 1]

    Gh = sp.eval_velocity_grad(state.u)
    Ge = np.stack(grad_u(x, y), axis=-1).reshape(Gh.shape)
    u_err = math.sqrt(sp.integrate(np.sum((Gh - Ge) ** 2, axis=(-1, -2))))

    ph = sp.eval_pressure(state.p)
    pe = p_fn(x, y)[0]
    diff = ph - pe
    diff = diff - sp.integrate(diff) / sp.area
    p_err = math.sqrt(sp.integrate(diff**2))

    sh = np.asarray(state.s).reshape(3, sp.n2)
    se = s_fn(x, y)
    gse = grad_s(x, y)
    total = 0.0
    for c, w in enumerate((1.0, 2.0, 1.0)):
        dv = sp.eval_scalar(sh[c]) - se[c]
        dg = sp.eval_scalar_grad(sh[c]) - np.stack(gse[2 * c : 2 * c + 2], axis=-1)
        total += w * sp.integrate(dv**2 + np.sum(dg**2, axis=-1))
    return u_err, p_err, math.sqrt(total)


@dataclass
class RateTable:
    n: list
    h: list
    errors: list  # rows of (u, p, s)
    rates: list  # rows of (u, p, s), one per successive pair
    iterations: list
    saturated: list = field(default_factory=list)

    def min_rates(self, last_only=False):
        rows = self.rates[-1:] if last_only else self.rates
        return tuple(min(r[k] for r in rows) for k in range(3))

    def to_dict(self):
        return asdict(self)

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "h", "u_H1_err", "p_L2_err", "s_H1_err", "rate_u", "rate_p", "rate_s", "iterations"])
            for k, (n, h, e, it) in enumerate(zip(self.n, self.h, self.errors, self.iterations)):
                r = self.rates[k - 1] if k else ("", "", "")
                w.writerow([n, h, *e, *r, it])

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)


SATURATION = 1e-11


def convergence_study(ms: ManufacturedSolution, p: FluidParams, levels: int = 3, n0: int = 8,
                      opts: SolverOptions | None = None, reference: str = "interpolant",
                      workers: int = 1) -> RateTable:
    """Solve on unit-square meshes ``n0 * 2**k`` and report observed orders.

    Errors below ``SATURATION`` (solution already in the FE space) are
    reported as saturated and given rate ``inf``.
    """
    if levels < 3:
        raise ValueError("levels must be >= 3")
    opts = opts or SolverOptions(tol=1e-11)
    f, g = mms_forcing(ms, p)
    ns = [n0 * 2**k for k in range(levels)]
    err_fn = error_norms if reference == "interpolant" else exact_error_norms

    def run(n):
        sp = FunctionSpaces(unit_square_mesh(n))
        try:
            state, rep = solve_picard(p, f, sp, opts, g=g)
        except SolverError as exc:
            raise SolveFailed(f"MMS solve failed at n={n}: {exc}") from exc
        return sp.mesh.h(), err_fn(state, ms, sp), rep.iterations

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, ns))
    else:
        results = [run(n) for n in ns]
    hs = [r[0] for r in results]
    errs = [tuple(r[1]) for r in results]
    rates, saturated = [], []
    for k in range(1, levels):
        row, sat = [], []
        for c in range(3):
            e0, e1 = errs[k - 1][c], errs[k][c]
            if e1 < SATURATION or e0 < SATURATION:
                row.append(math.inf)
                sat.append(True)
            else:
                row.append(math.log(e0 / e1) / math.log(hs[k - 1] / hs[k]))
                sat.append(False)
        rates.append(tuple(row))
        saturated.append(tuple(sat))
    return RateTable(ns, hs, errs, rates, [r[2] for r in results], saturated)


# --- uniqueness probe ------------------------------------------------------------------

@dataclass
class ProbeReport:
    n_starts: int
    radius: float
    converged: list
    iterations: list
    norms_x: list
    max_distance: float
    tolerance: float | None = None
    within_tolerance: bool | None = None
    excluded: list = field(default_factory=list)
    seed: int = 0

    def to_dict(self):
        return asdict(self)


def multistart_uniqueness_probe(p: FluidParams, f, sp: FunctionSpaces, n_starts: int = 5, seed: int = 0,
                                radius: float | None = None, opts: SolverOptions | None = None,
                                rel_tol: float | None = 1e-8, workers: int = 1) -> ProbeReport:
    """Run Picard from random starts inside the ball ``||xi||_X <= radius``.

    Non-converged starts are excluded from the distance computation and
    listed in ``excluded``. ``within_tolerance`` compares the max pairwise
    X-distance with ``rel_tol * (1 + max ||xi||_X)``.
    """
    if n_starts < 2:
        raise ValueError("n_starts must be >= 2")
    base = opts or SolverOptions(tol=1e-12)
    radius = 1.0 if not radius else radius
    rng = np.random.default_rng(seed)
    starts = []
    for _ in range(n_starts):
        st = random_state(sp, rng)
        starts.append(st.scaled(radius * rng.uniform(0.1, 1.0) / norm_X(sp, st, p.r)))

    def run(st):
        o = SolverOptions(**{**asdict(base), "initial": "given"})
        try:
            return solve_picard(p, f, sp, o, initial_state=st)
        except SolverError as exc:
            return exc.state, exc.report

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(run, starts))
    else:
        results = [run(st) for st in starts]

    conv = [bool(rep is not None and rep.converged) for _, rep in results]
    good = [st for (st, _), c in zip(results, conv) if c]
    dist = 0.0
    for a, b in itertools.combinations(good, 2):
        dist = max(dist, norm_X(sp, a - b, p.r))
    norms = [norm_X(sp, st, p.r) if st is not None else math.nan for st, _ in results]
    report = ProbeReport(
        n_starts, radius, conv, [rep.iterations if rep else 0 for _, rep in results], norms, dist,
        excluded=[k for k, c in enumerate(conv) if not c], seed=seed,
    )
    if rel_tol is not None:
        scale = 1.0 + max((n for n, c in zip(norms, conv) if c), default=0.0)
        report.tolerance = rel_tol * scale
        report.within_tolerance = bool(dist <= report.tolerance and len(good) >= 2)
    return report
