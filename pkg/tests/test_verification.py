import json

import numpy as np
import pytest
import sympy as sp_

from oldroyd.discretization import FunctionSpaces
from oldroyd.mesh import unit_square_mesh
from oldroyd.model import FluidParams
from oldroyd.verification import (
    X, Y, ManufacturedSolution, RateTable, convergence_study, default_benchmark, error_norms,
    exact_error_norms, interpolate_solution, mms_forcing, multistart_uniqueness_probe,
    strong_form_symbolic,
)

P = FluidParams(re=1, we=0.05, r=0.5, a=1, diff=1)


@pytest.fixture(scope="module")
def bench():
    return default_benchmark(1.0, 0.1)


def fd_strong_form(ms, p, x, y, h=1e-3):
    """Strong-form residual from central differences of the closed-form fields only."""
    uf, pf, sf = ms.callables()
    U = lambda a, b: np.array(uf(a, b))
    S = lambda a, b: np.array(sf(a, b))
    ex, ey = (h, 0.0), (0.0, h)

    def d(F, e):
        return (F(x + e[0], y + e[1]) - F(x - e[0], y - e[1])) / (2 * h)

    def lap(F):
        return (F(x + h, y) + F(x - h, y) + F(x, y + h) + F(x, y - h) - 4 * F(x, y)) / h**2

    u = U(x, y)
    ux, uy = d(U, ex), d(U, ey)
    grad = np.array([[ux[0], uy[0]], [ux[1], uy[1]]])  # grad[i, j] = d u_i / d x_j
    px = d(lambda a, b: np.array(pf(a, b)), ex)[0]
    py = d(lambda a, b: np.array(pf(a, b)), ey)[0]
    sx, sy = d(S, ex), d(S, ey)  # components (s11, s12, s22)
    div_s = np.array([sx[0] + sy[1], sx[1] + sy[2]])
    f = p.re * grad @ u - (1 - p.r) * lap(U) + np.array([px, py]) - div_s

    s = S(x, y)
    Sm = np.array([[s[0], s[1]], [s[1], s[2]]])
    D, W = 0.5 * (grad + grad.T), 0.5 * (grad - grad.T)
    transport = u[0] * sx + u[1] * sy
    ga = W @ Sm - Sm @ W + p.a * (D @ Sm + Sm @ D)
    ls = lap(S)
    g = (p.we * (transport + np.array([ga[0, 0], ga[0, 1], ga[1, 1]])) + s - p.diff * ls
         - 2 * p.r * np.array([D[0, 0], D[0, 1], D[1, 1]]))
    return f, g


def test_benchmark_invariants(bench):
    bench.check_invariants()


def test_forcing_matches_finite_differences(bench):
    f_fn, g_fn = mms_forcing(bench, P)
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.05, 0.95, size=(50, 2))
    errs = {}
    for h in (2e-3, 1e-3):
        worst = 0.0
        for x, y in pts:
            f_fd, g_fd = fd_strong_form(bench, P, x, y, h)
            f = np.array(f_fn(x, y), dtype=float)
            g = np.array(g_fn(x, y), dtype=float)
            worst = max(worst, np.abs(f - f_fd).max() / (1 + np.abs(f).max()),
                        np.abs(g - g_fd).max() / (1 + np.abs(g).max()))
        errs[h] = worst
    assert errs[1e-3] < 1e-5
    # second-order differences: halving the step cuts the gap about fourfold
    assert errs[1e-3] < errs[2e-3] / 3


def test_zero_solution_zero_forcing():
    ms = ManufacturedSolution(sp_.Integer(0), sp_.Integer(0), (sp_.Integer(0),) * 3)
    f, g = strong_form_symbolic(ms, P)
    assert all(sp_.simplify(c) == 0 for c in (*f, *g))


def test_forcing_linear_in_solution(bench):
    f1, g1 = strong_form_symbolic(bench, P.replace(re=0, we=0))
    double = ManufacturedSolution(2 * bench.psi, 2 * bench.pressure, tuple(2 * c for c in bench.stress))
    f2, g2 = strong_form_symbolic(double, P.replace(re=0, we=0))
    assert all(sp_.simplify(b - 2 * a) == 0 for a, b in zip((*f1, *g1), (*f2, *g2)))


def test_stress_equation_eigenfunction():
    # for u = (pi sin(pi x) cos(pi y), -pi cos(pi x) sin(pi y)), Δ D(u) = -2 pi^2 D(u),
    # so sigma = 2 r D(u) / (1 + 2 pi^2 D) solves the stress equation with no source when We = 0
    pi = sp_.pi
    u = (pi * sp_.sin(pi * X) * sp_.cos(pi * Y), -pi * sp_.cos(pi * X) * sp_.sin(pi * Y))
    p = FluidParams(re=1, we=0, r=0.3, diff=0.7)
    c = 2 * sp_.Rational(3, 10) / (1 + 2 * pi**2 * sp_.Rational(7, 10))
    Du = [sp_.diff(u[0], X), (sp_.diff(u[0], Y) + sp_.diff(u[1], X)) / 2, sp_.diff(u[1], Y)]
    ms = ManufacturedSolution(None, sp_.Integer(0), tuple(c * e for e in Du), velocity_override=u)
    _, g = strong_form_symbolic(ms, p)
    assert all(sp_.simplify(e) == 0 for e in g)


def test_errors_of_interpolant(bench):
    sp = FunctionSpaces(unit_square_mesh(4))
    st = interpolate_solution(bench, sp)
    assert max(error_norms(st, bench, sp)) == 0
    coarse = exact_error_norms(st, bench, sp)
    sp8 = FunctionSpaces(unit_square_mesh(8))
    fine = exact_error_norms(interpolate_solution(bench, sp8), bench, sp8)
    assert all(b < a for a, b in zip(coarse, fine))


def test_linear_study_rates(tmp_path, bench):
    tab = convergence_study(bench, FluidParams(re=0, we=0, diff=1), levels=3, n0=4)
    assert tab.rates[-1][0] >= 1.9
    assert tab.n == [4, 8, 16]
    assert all(b < a for e0, e1 in zip(tab.errors, tab.errors[1:]) for a, b in zip(e0, e1))
    tab.write_csv(tmp_path / "r.csv")
    tab.write_json(tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text())["n"] == [4, 8, 16]
    assert (tmp_path / "r.csv").read_text().splitlines()[0].startswith("n,h,")


def test_study_rejects_two_levels(bench):
    with pytest.raises(ValueError):
        convergence_study(bench, P, levels=2)


def test_saturated_rates_reported():
    zero = ManufacturedSolution(sp_.Integer(0), sp_.Integer(0), (sp_.Integer(0),) * 3)
    tab = convergence_study(zero, P, levels=3, n0=2)
    assert all(all(row) for row in tab.saturated)
    assert tab.min_rates() == (np.inf, np.inf, np.inf)


def test_probe_zero_forcing():
    sp = FunctionSpaces(unit_square_mesh(4))
    rep = multistart_uniqueness_probe(P, None, sp, n_starts=4, seed=1, rel_tol=1e-12)
    assert all(rep.converged) and rep.within_tolerance
    assert rep.max_distance <= 1e-12


def test_probe_small_data_coincident():
    sp = FunctionSpaces(unit_square_mesh(4))
    f = lambda x, y: (0.5 * np.sin(np.pi * y), 0 * x)
    rep = multistart_uniqueness_probe(P, f, sp, n_starts=3, seed=2, radius=0.3, workers=2)
    assert rep.within_tolerance and not rep.excluded
    assert rep.to_dict()["n_starts"] == 3


def test_probe_needs_two_starts():
    with pytest.raises(ValueError):
        multistart_uniqueness_probe(P, None, FunctionSpaces(unit_square_mesh(2)), n_starts=1)
