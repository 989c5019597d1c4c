import numpy as np
import pytest
import scipy.sparse as sps

from oldroyd.discretization import (
    FunctionSpaces, State, apply_Pk, h_minus1_norm, norm_X, random_state, weak_residual,
)
from oldroyd.errors import LinearSolveFailure, MaxIterExceeded, ParameterError
from oldroyd.mesh import unit_square_mesh
from oldroyd.model import FluidParams
from oldroyd.solver import (
    PicardProblem, SolverOptions, _linear_solve, fix_pressure_mean, picard_sweep, solve_picard,
)

SWIRL = lambda x, y: (-(y - 0.5), x - 0.5)


@pytest.fixture(scope="module")
def sp():
    return FunctionSpaces(unit_square_mesh(6))


def scaled_swirl(sp, target=0.1):
    c = target / h_minus1_norm(SWIRL, sp)
    return lambda x, y: tuple(c * np.asarray(v) for v in SWIRL(x, y))


def test_zero_forcing_one_iteration(sp):
    state, rep = solve_picard(FluidParams(re=1, we=0.05, a=1), None, sp)
    assert rep.converged and rep.iterations == 1
    assert not state.u.any() and not state.s.any() and not state.p.any()


def test_linear_case_two_iterations(sp):
    state, rep = solve_picard(FluidParams(), scaled_swirl(sp), sp)
    assert rep.converged and rep.iterations <= 2
    assert norm_X(sp, state, 0.5) > 0


@pytest.mark.parametrize("scheme", ["coupled", "decoupled"])
def test_converged_state_is_fixed_point(sp, scheme):
    p = FluidParams(re=1, we=0.05, a=1, diff=1)
    f = scaled_swirl(sp)
    opts = SolverOptions(scheme=scheme, tol=1e-11)
    state, rep = solve_picard(p, f, sp, opts)
    assert rep.converged
    res = weak_residual(sp, state, p, f)
    assert max(res) <= opts.tol
    nxt = picard_sweep(PicardProblem(sp, p, f), state, opts)
    nxt = fix_pressure_mean(nxt, sp)
    assert norm_X(sp, nxt - state, p.r) <= 10 * opts.tol
    assert norm_X(sp, apply_Pk(sp, state, p, f), p.r) <= rep.pk_constant * opts.tol * 1.01


def test_schemes_agree(sp):
    p = FluidParams(re=1, we=0.05, a=-1, diff=0.5)
    f = scaled_swirl(sp)
    a, _ = solve_picard(p, f, sp, SolverOptions(tol=1e-12))
    b, rep = solve_picard(p, f, sp, SolverOptions(tol=1e-12, scheme="decoupled", relaxation=1.0))
    assert norm_X(sp, a - b, p.r) < 1e-9
    assert np.abs(a.p - b.p).max() < 1e-8


def test_iterative_linear_solver(sp):
    p = FluidParams(re=1, we=0.01, a=0.5)
    f = scaled_swirl(sp)
    a, _ = solve_picard(p, f, sp, SolverOptions(tol=1e-10))
    b, _ = solve_picard(p, f, sp, SolverOptions(tol=1e-10, linear_solver="iterative"))
    assert norm_X(sp, a - b, p.r) < 1e-8


def test_relaxation_and_random_start(sp):
    p = FluidParams(re=1, we=0.05, a=1)
    f = scaled_swirl(sp)
    a, ra = solve_picard(p, f, sp, SolverOptions(relaxation=0.5, tol=1e-11))
    b, rb = solve_picard(p, f, sp, SolverOptions(initial="random", seed=3, tol=1e-11), c2=0.2)
    assert ra.relaxation == 0.5 and rb.relaxation == 1.0
    assert norm_X(sp, a - b, p.r) < 1e-9


def test_default_relaxation_follows_c1():
    assert SolverOptions().resolved_relaxation(0.3) == 1.0
    assert SolverOptions().resolved_relaxation(0.8) == 0.5
    assert SolverOptions(relaxation=0.7).resolved_relaxation(0.8) == 0.7


def test_deterministic(sp):
    p = FluidParams(re=1, we=0.05, a=1)
    f = scaled_swirl(sp)
    opts = SolverOptions(initial="random", seed=11)
    a, ra = solve_picard(p, f, sp, opts)
    b, rb = solve_picard(p, f, sp, opts)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.s, b.s)
    assert ra.residual_history == rb.residual_history


def test_max_iter_carries_state(sp):
    p = FluidParams(re=1, we=0.05, a=1)
    with pytest.raises(MaxIterExceeded) as exc:
        solve_picard(p, scaled_swirl(sp), sp, SolverOptions(max_iter=1, tol=1e-14, initial="random"))
    assert exc.value.state is not None and exc.value.report.iterations == 1
    assert not exc.value.report.converged


def test_given_initial_requires_state(sp):
    with pytest.raises(ParameterError):
        solve_picard(FluidParams(), None, sp, SolverOptions(initial="given"))


@pytest.mark.parametrize("bad", [dict(relaxation=0.0), dict(relaxation=1.5), dict(tol=0), dict(max_iter=0),
                                 dict(initial="guess"), dict(scheme="newton"), dict(linear_solver="cg")])
def test_options_validated(bad):
    with pytest.raises(ParameterError):
        SolverOptions(**bad)


def test_fix_pressure_mean(sp):
    m = sp.pressure_mean_vector
    rng = np.random.default_rng(0)
    st = random_state(sp, rng)
    st.p = rng.standard_normal(sp.n_pressure)
    st.p -= (m @ st.p) / m.sum()
    assert np.allclose(fix_pressure_mean(st, sp).p, st.p, atol=1e-15)
    const = State(st.u, np.full(sp.n_pressure, 2.5), st.s)
    assert np.abs(fix_pressure_mean(const, sp).p).max() < 1e-14


def test_fix_pressure_mean_keeps_momentum_residual(sp):
    # against discretely div-free tests the pressure drops out, so shifting it is harmless
    p = FluidParams(re=1, we=0.05, a=1)
    f = scaled_swirl(sp)
    rng = np.random.default_rng(1)
    st = random_state(sp, rng)
    st.p = rng.standard_normal(sp.n_pressure) + 4.0
    before = apply_Pk(sp, st, p, f)
    after = apply_Pk(sp, fix_pressure_mean(st, sp), p, f)
    assert norm_X(sp, before - after, p.r) <= 1e-12 * (1 + norm_X(sp, before, p.r))


def test_singular_system_reports_failure(sp):
    with pytest.raises(LinearSolveFailure):
        _linear_solve(sps.csr_matrix((3, 3)), np.ones(3), SolverOptions())


def test_report_serializes(sp):
    _, rep = solve_picard(FluidParams(we=0.01, a=1), scaled_swirl(sp), sp)
    d = rep.to_dict()
    assert d["converged"] and len(d["residual_history"]) == d["iterations"]
    assert d["pk_constant"] == pytest.approx(np.sqrt(2.0))
