"""Picard iteration for the discrete Oldroyd system."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .discretization import (
    FunctionSpaces,
    State,
    assemble_convection,
    assemble_stress_blocks,
    load_vector,
    norm_V,
    norm_W,
    random_state,
    residual_norms,
    stress_load_vector,
)
from .errors import Diverged, LinearSolveFailure, MaxIterExceeded, ParameterError
from .model import FluidParams

log = logging.getLogger(__name__)

INITIAL_KINDS = ("zero", "given", "random")
SCHEMES = ("coupled", "decoupled")


@dataclass
class SolverOptions:
    """Picard controls.

    ``relaxation=None`` picks 1.0 when C_I <= 0.5 (or unknown) and 0.5
    otherwise. ``scheme="coupled"`` solves velocity, pressure and stress
    together with frozen transport coefficients; ``"decoupled"`` performs the
    Oseen solve with frozen stress followed by a separate stress solve.
    """

    relaxation: float | None = None
    tol: float = 1e-10
    max_iter: int = 100
    initial: str = "zero"
    seed: int = 0
    scheme: str = "coupled"
    linear_solver: str = "direct"
    iterative_rtol: float = 1e-10

    def __post_init__(self):
        if self.relaxation is not None and not 0.0 < self.relaxation <= 1.0:
            raise ParameterError("relaxation must lie in (0, 1]")
        if self.tol <= 0:
            raise ParameterError("tol must be positive")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be >= 1")
        if self.initial not in INITIAL_KINDS:
            raise ParameterError(f"initial must be one of {INITIAL_KINDS}")
        if self.scheme not in SCHEMES:
            raise ParameterError(f"scheme must be one of {SCHEMES}")
        if self.linear_solver not in ("direct", "iterative"):
            raise ParameterError("linear_solver must be 'direct' or 'iterative'")

    def resolved_relaxation(self, c1=None) -> float:
        if self.relaxation is not None:
            return self.relaxation
        return 1.0 if c1 is None or c1 <= 0.5 else 0.5


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    final_norms: tuple = (0.0, 0.0, 0.0)
    scheme: str = "coupled"
    relaxation: float = 1.0
    # ||apply_Pk(state)||_X <= pk_constant * tol at convergence
    pk_constant: float = 1.0

    def to_dict(self):
        d = asdict(self)
        d["residual_history"] = [list(map(float, r)) for r in self.residual_history]
        d["final_norms"] = list(map(float, self.final_norms))
        return d


def _linear_solve(matrix, rhs, opts: SolverOptions):
    matrix = sps.csc_matrix(matrix)
    if opts.linear_solver == "direct":
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            try:
                sol = spla.spsolve(matrix, rhs)
            except (spla.MatrixRankWarning, RuntimeError) as exc:
                raise LinearSolveFailure(f"direct solve failed: {exc}") from exc
    else:
        try:
            ilu = spla.spilu(matrix, drop_tol=1e-6, fill_factor=20)
        except RuntimeError as exc:
            raise LinearSolveFailure(f"ILU setup failed: {exc}") from exc
        M = spla.LinearOperator(matrix.shape, ilu.solve)
        sol, info = spla.gmres(matrix, rhs, M=M, rtol=opts.iterative_rtol, atol=0.0, restart=200, maxiter=50)
        if info != 0:
            raise LinearSolveFailure(f"GMRES did not converge (info={info})")
    if not np.all(np.isfinite(sol)):
        raise LinearSolveFailure("linear solve produced non-finite values")
    return sol


class PicardProblem:
    """Discrete system for fixed spaces, parameters and loads."""

    def __init__(self, sp: FunctionSpaces, p: FluidParams, f, g=None):
        self.sp = sp
        self.p = p
        self.F = load_vector(sp, f)
        self.G = None if g is None else stress_load_vector(sp, g)
        f_idx = sp.vel_free
        self.free = f_idx
        self.Kf = ((1.0 - p.r) * sp.velocity_gram)[f_idx][:, f_idx].tocsr()
        self.Bf = sp.divergence[:, f_idx].tocsr()
        self.Cf = sp.coupling[f_idx].tocsr()
        self.mvec = sps.csr_matrix(sp.pressure_mean_vector.reshape(-1, 1))

    def residuals(self, state: State):
        return residual_norms(self.sp, state, self.p, self.F, self.G)

    def _stress_rhs(self, u):
        rhs = 2.0 * self.p.r * (self.sp.coupling.T @ u)
        return rhs if self.G is None else rhs + self.G

    def _momentum_matrix(self, w):
        A = self.Kf
        if self.p.re:
            N = assemble_convection(self.sp, w)[self.free][:, self.free]
            A = A + self.p.re * N
        return A

    def coupled_step(self, w, opts) -> State:
        """Solve the linear system with transport coefficients frozen at ``w``."""
        sp, p = self.sp, self.p
        L = assemble_stress_blocks(sp, p, w).lhs
        S_u = -(2.0 * p.r) * sp.coupling.T[:, self.free]
        A = self._momentum_matrix(w)
        mat = sps.bmat([
            [A, -self.Bf.T, self.Cf, None],
            [-self.Bf, None, None, self.mvec],
            [S_u, None, L, None],
            [None, self.mvec.T, None, None],
        ])
        nf, n1, ns = len(self.free), sp.n1, sp.n_stress
        rhs = np.zeros(nf + n1 + ns + 1)
        rhs[:nf] = self.F[self.free]
        if self.G is not None:
            rhs[nf + n1 : nf + n1 + ns] = self.G
        sol = _linear_solve(mat, rhs, opts)
        u = np.zeros(sp.n_velocity)
        u[self.free] = sol[:nf]
        return State(u, sol[nf : nf + n1], sol[nf + n1 : nf + n1 + ns])

    def oseen_step(self, w, s_frozen, opts):
        sp = self.sp
        A = self._momentum_matrix(w)
        mat = sps.bmat([[A, -self.Bf.T, None], [-self.Bf, None, self.mvec], [None, self.mvec.T, None]])
        nf, n1 = len(self.free), sp.n1
        rhs = np.zeros(nf + n1 + 1)
        rhs[:nf] = self.F[self.free] - self.Cf @ s_frozen
        sol = _linear_solve(mat, rhs, opts)
        u = np.zeros(sp.n_velocity)
        u[self.free] = sol[:nf]
        return u, sol[nf : nf + n1]

    def stress_step(self, u, opts):
        L = assemble_stress_blocks(self.sp, self.p, u).lhs
        return _linear_solve(L, self._stress_rhs(u), opts)


def picard_sweep(problem: PicardProblem, state: State, opts: SolverOptions, relaxation=1.0) -> State:
    """One Picard update from ``state``."""
    theta = relaxation
    if opts.scheme == "coupled":
        new = problem.coupled_step(state.u, opts)
        if theta == 1.0:
            return new
        return State(
            (1 - theta) * state.u + theta * new.u,
            (1 - theta) * state.p + theta * new.p,
            (1 - theta) * state.s + theta * new.s,
        )
    u, pr = problem.oseen_step(state.u, state.s, opts)
    s_tilde = problem.stress_step(u, opts)
    s = s_tilde if theta == 1.0 else (1 - theta) * state.s + theta * s_tilde
    return State(u, pr, s)


def fix_pressure_mean(state: State, sp: FunctionSpaces) -> State:
    """Shift the pressure to zero mean; velocity and stress are untouched."""
    m = sp.pressure_mean_vector
    shift = (m @ state.p) / m.sum()
    return State(state.u, state.p - shift, state.s)


def _initial_state(sp, opts, initial_state, radius, r):
    if opts.initial == "zero":
        return State.zeros(sp)
    if opts.initial == "given":
        if initial_state is None:
            raise ParameterError("initial='given' requires initial_state")
        return initial_state.copy()
    rng = np.random.default_rng(opts.seed)
    st = random_state(sp, rng)
    nx = math.sqrt(2 * r * norm_V(sp, st.u) ** 2 + norm_W(sp, st.s) ** 2)
    scale = (radius if radius else 1.0) * rng.uniform(0.0, 1.0) / nx
    return st.scaled(scale)


def solve_picard(p: FluidParams, f, sp: FunctionSpaces, opts: SolverOptions | None = None, *,
                 g=None, initial_state: State | None = None, c1: float | None = None,
                 c2: float | None = None, problem: PicardProblem | None = None):
    """Solve the discrete system by Picard iteration.

    ``c1`` and ``c2`` (the discrete existence constants) are optional hints:
    ``c1`` selects the default relaxation, ``c2`` sets the divergence radius
    ``10 * max(c2, 1)`` and the radius of random initial states.

    Raises :class:`MaxIterExceeded` or :class:`Diverged` (both carrying the
    last state and the report) and :class:`LinearSolveFailure`.
    """
    opts = opts or SolverOptions()
    problem = problem or PicardProblem(sp, p, f, g)
    theta = opts.resolved_relaxation(c1)
    report = SolveReport(scheme=opts.scheme, relaxation=theta, pk_constant=math.sqrt(1.0 + 2.0 * p.r))
    blowup = 10.0 * max(c2 if c2 is not None else 0.0, 1.0)

    state = _initial_state(sp, opts, initial_state, c2, p.r)
    growth = 0
    prev = math.inf
    for it in range(1, opts.max_iter + 1):
        state = picard_sweep(problem, state, opts, theta)
        res = problem.residuals(state)
        report.residual_history.append(res)
        report.iterations = it
        total = res[0] + res[1]
        log.debug("picard it=%d residual=(%.3e, %.3e)", it, *res)
        if res[0] <= opts.tol and res[1] <= opts.tol:
            report.converged = True
            break
        growth = growth + 1 if total > prev else 0
        prev = total
        nx = math.sqrt(2 * p.r * norm_V(sp, state.u) ** 2 + norm_W(sp, state.s) ** 2)
        if growth >= 5 and nx > blowup:
            _finalize(report, sp, state, p)
            raise Diverged(f"iteration diverged at it={it} (||xi||_X={nx:.3e})", state, report)
    state = fix_pressure_mean(state, sp)
    _finalize(report, sp, state, p)
    if not report.converged:
        raise MaxIterExceeded(
            f"no convergence in {opts.max_iter} iterations (residual {report.residual_history[-1]})",
            state, report,
        )
    return state, report


def _finalize(report, sp, state, p):
    nv, nw = norm_V(sp, state.u), norm_W(sp, state.s)
    report.final_norms = (nv, nw, math.sqrt(2 * p.r * nv**2 + nw**2))
