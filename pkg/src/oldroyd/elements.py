"""Reference-triangle quadrature and Lagrange P1/P2 shape functions.

Reference triangle: vertices (0,0), (1,0), (0,1). P2 local dof order is the
three vertices followed by the midpoints of edges (0,1), (1,2), (2,0), which
matches the local edge numbering of :meth:`oldroyd.mesh.Mesh.edges`.
"""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

QUADRATURE_DEGREE = 8


@lru_cache(maxsize=None)
def triangle_quadrature(degree: int = QUADRATURE_DEGREE):
    """Collapsed-coordinate (Stroud conical product) rule exact to ``degree``.

    Returns points of shape (nq, 2) and weights summing to the reference area 1/2.
    """
    n = degree // 2 + 1
    # Gauss-Jacobi with weight (1 - s) on [0, 1] absorbs the Duffy Jacobian
    sj, wj = roots_jacobi(n, 1.0, 0.0)
    sj = 0.5 * (sj + 1.0)
    wj = wj / 4.0
    tl, wl = roots_legendre(n)
    tl = 0.5 * (tl + 1.0)
    wl = wl / 2.0
    S, T = np.meshgrid(sj, tl, indexing="ij")
    WS, WT = np.meshgrid(wj, wl, indexing="ij")
    xi = S.ravel()
    eta = (T * (1.0 - S)).ravel()
    w = (WS * WT).ravel()
    pts = np.column_stack([xi, eta])
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


def p1_basis(pts):
    xi, eta = pts[:, 0], pts[:, 1]
    phi = np.column_stack([1.0 - xi - eta, xi, eta])
    dphi = np.broadcast_to(np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (len(pts), 3, 2)).copy()
    return phi, dphi


def p2_basis(pts):
    """Values (nq, 6) and reference gradients (nq, 6, 2) of the P2 basis."""
    xi, eta = pts[:, 0], pts[:, 1]
    l0, l1, l2 = 1.0 - xi - eta, xi, eta
    # d lambda / d (xi, eta)
    g0, g1, g2 = np.array([-1.0, -1.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0])
    phi = np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ])
    dphi = np.stack([
        np.outer(4 * l0 - 1, g0), np.outer(4 * l1 - 1, g1), np.outer(4 * l2 - 1, g2),
        4 * (np.outer(l1, g0) + np.outer(l0, g1)),
        4 * (np.outer(l2, g1) + np.outer(l1, g2)),
        4 * (np.outer(l0, g2) + np.outer(l2, g0)),
    ], axis=1)
    return phi, dphi


P2_NODES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
