import math

import numpy as np
import pytest

from oldroyd.elements import P2_NODES, p1_basis, p2_basis, triangle_quadrature


@pytest.mark.parametrize("i,j", [(i, j) for i in range(9) for j in range(9) if i + j <= 8])
def test_quadrature_exact_on_monomials(i, j):
    pts, w = triangle_quadrature()
    exact = math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)
    assert w @ (pts[:, 0] ** i * pts[:, 1] ** j) == pytest.approx(exact, rel=1e-13, abs=1e-16)


def test_quadrature_points_inside():
    pts, w = triangle_quadrature()
    assert np.all(w > 0)
    assert np.all(pts >= 0) and np.all(pts.sum(axis=1) <= 1)
    assert w.sum() == pytest.approx(0.5)


NODES = P2_NODES


def test_p2_kronecker_and_partition():
    phi, dphi = p2_basis(NODES)
    assert np.allclose(phi, np.eye(6))
    pts = np.random.default_rng(0).dirichlet([1, 1, 1], 20)[:, :2]
    phi, dphi = p2_basis(pts)
    assert np.allclose(phi.sum(axis=1), 1)
    assert np.allclose(dphi.sum(axis=1), 0)


def test_p2_gradients_match_finite_differences():
    pts = np.random.default_rng(1).dirichlet([2, 2, 2], 10)[:, :2]
    _, dphi = p2_basis(pts)
    h = 1e-6
    for k, e in enumerate(np.eye(2)):
        fd = (p2_basis(pts + h * e)[0] - p2_basis(pts - h * e)[0]) / (2 * h)
        assert np.allclose(dphi[:, :, k], fd, atol=1e-8)


def test_p1_basis():
    phi, dphi = p1_basis(NODES[:3])
    assert np.allclose(phi, np.eye(3))
    assert np.allclose(dphi.sum(axis=1), 0)
