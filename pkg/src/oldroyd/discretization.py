"""Taylor-Hood spaces for velocity/pressure, P2 symmetric stresses, and assembly.

Layouts
-------
* scalar P2 field: ``n2`` dofs (vertices first, then edge midpoints)
* velocity: ``2 * n2``, component-major ``(u1, u2)``
* pressure: ``n1 = n_vertices`` P1 dofs
* stress: ``3 * n2``, components ``(s11, s12, s22)``; the Frobenius product
  weights them ``(1, 2, 1)``

All transport terms are assembled in skew-symmetric form, so the energy
identity obtained by testing with the solution holds algebraically even
though the divergence constraint is only imposed weakly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .elements import p1_basis, p2_basis, triangle_quadrature
from .errors import LinearSolveFailure
from .mesh import Mesh
from .model import FluidParams, eval_g_a, sym_components, sym_from_components

FROB_WEIGHTS = np.array([1.0, 2.0, 1.0])


def _scatter(local, rows, cols, shape):
    """Sum element matrices ``local[e, a, b]`` into a CSR matrix."""
    ne, na, nb = local.shape
    r = np.broadcast_to(rows[:, :, None], (ne, na, nb)).ravel()
    c = np.broadcast_to(cols[:, None, :], (ne, na, nb)).ravel()
    return sps.csr_matrix((local.ravel(), (r, c)), shape=shape)


def _factor(matrix):
    try:
        return spla.splu(sps.csc_matrix(matrix))
    except RuntimeError as exc:
        raise LinearSolveFailure(f"sparse factorization failed: {exc}") from exc


class FunctionSpaces:
    """Mixed P2-P1-P2 spaces on a mesh plus every parameter-free operator."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        edges, tri_edges = mesh.edges()
        nv = mesh.n_vertices
        self.n1 = nv
        self.n2 = nv + len(edges)
        self.cell_dofs = np.hstack([mesh.triangles, tri_edges + nv])
        self.cell_dofs_p = mesh.triangles
        self.dof_coords = np.concatenate(
            [mesh.vertices, 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])]
        )

        lookup = {tuple(e): k for k, e in enumerate(edges.tolist())}
        b_edge = [lookup[tuple(sorted(e))] for e in mesh.boundary_edges.tolist()]
        boundary = np.zeros(self.n2, dtype=bool)
        boundary[mesh.boundary_edges.ravel()] = True
        boundary[np.asarray(b_edge, dtype=np.int64) + nv] = True
        self.boundary_mask = boundary
        self.vel_boundary_mask = np.concatenate([boundary, boundary])
        self.vel_free = np.flatnonzero(~self.vel_boundary_mask)
        self.scalar_free = np.flatnonzero(~boundary)

        pts, w = triangle_quadrature()
        self.qref = pts
        self.phi, dphi_ref = p2_basis(pts)
        self.psi, _ = p1_basis(pts)

        x = mesh.vertices[mesh.triangles]
        J = np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]], axis=2)  # J[e, :, k] = d x / d xi_k
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        invJ = np.linalg.inv(J)
        self.det = det
        self.qw = np.outer(det, w)
        self.qpts = x[:, 0][:, None, :] + np.einsum("edk,qk->eqd", J, pts)
        # physical gradients grads[e, q, i, d]
        self.grads = np.einsum("qik,ekd->eqid", dphi_ref, invJ)

    # --- sizes -----------------------------------------------------------------
    @property
    def n_velocity(self):
        return 2 * self.n2

    @property
    def n_pressure(self):
        return self.n1

    @property
    def n_stress(self):
        return 3 * self.n2

    @property
    def area(self):
        return float(self.qw.sum())

    # --- evaluation at quadrature points ----------------------------------------
    def eval_scalar(self, vec):
        return np.einsum("qi,ei->eq", self.phi, np.asarray(vec)[self.cell_dofs])

    def eval_scalar_grad(self, vec):
        return np.einsum("eqid,ei->eqd", self.grads, np.asarray(vec)[self.cell_dofs])

    def eval_velocity(self, u):
        u = np.asarray(u).reshape(2, self.n2)
        return np.stack([self.eval_scalar(u[0]), self.eval_scalar(u[1])], axis=-1)

    def eval_velocity_grad(self, u):
        """``G[e, q, i, j] = d u_i / d x_j``."""
        u = np.asarray(u).reshape(2, self.n2)
        return np.stack([self.eval_scalar_grad(u[0]), self.eval_scalar_grad(u[1])], axis=-2)

    def eval_stress(self, s):
        s = np.asarray(s).reshape(3, self.n2)
        return sym_from_components(*(self.eval_scalar(c) for c in s))

    def eval_pressure(self, p):
        return np.einsum("qi,ei->eq", self.psi, np.asarray(p)[self.cell_dofs_p])

    def integrate(self, values):
        return float(np.sum(values * self.qw))

    # --- interpolation -----------------------------------------------------------
    def interpolate_scalar(self, fn):
        x, y = self.dof_coords[:, 0], self.dof_coords[:, 1]
        return np.broadcast_to(np.asarray(fn(x, y), dtype=float), x.shape).copy()

    def interpolate_velocity(self, fn):
        x, y = self.dof_coords[:, 0], self.dof_coords[:, 1]
        vals = fn(x, y)
        return np.concatenate([np.broadcast_to(np.asarray(v, dtype=float), x.shape) for v in vals])

    def interpolate_stress(self, fn):
        x, y = self.dof_coords[:, 0], self.dof_coords[:, 1]
        vals = fn(x, y)
        return np.concatenate([np.broadcast_to(np.asarray(v, dtype=float), x.shape) for v in vals])

    def interpolate_pressure(self, fn):
        x, y = self.mesh.vertices[:, 0], self.mesh.vertices[:, 1]
        return np.broadcast_to(np.asarray(fn(x, y), dtype=float), x.shape).copy()

    # --- parameter-free operators -----------------------------------------------
    @cached_property
    def stiffness(self):
        loc = np.einsum("eqid,eqjd,eq->eij", self.grads, self.grads, self.qw)
        return _scatter(loc, self.cell_dofs, self.cell_dofs, (self.n2, self.n2))

    @cached_property
    def mass(self):
        loc = np.einsum("qi,qj,eq->eij", self.phi, self.phi, self.qw)
        return _scatter(loc, self.cell_dofs, self.cell_dofs, (self.n2, self.n2))

    @cached_property
    def pressure_mass(self):
        loc = np.einsum("qi,qj,eq->eij", self.psi, self.psi, self.qw)
        return _scatter(loc, self.cell_dofs_p, self.cell_dofs_p, (self.n1, self.n1))

    @cached_property
    def pressure_mean_vector(self):
        """``m[i] = integral of the i-th P1 basis function``."""
        loc = np.einsum("qi,eq->ei", self.psi, self.qw)
        return np.bincount(self.cell_dofs_p.ravel(), loc.ravel(), minlength=self.n1)

    @cached_property
    def _derivative_mass(self):
        """``E_d[i, j] = integral of (d_d phi_i) phi_j`` for d = 0, 1."""
        out = []
        for d in range(2):
            loc = np.einsum("eqi,qj,eq->eij", self.grads[..., d], self.phi, self.qw)
            out.append(_scatter(loc, self.cell_dofs, self.cell_dofs, (self.n2, self.n2)))
        return out

    @cached_property
    def divergence(self):
        """``B[i, (c, j)] = integral of psi_i d_c phi_j`` (pressure rows)."""
        blocks = []
        for c in range(2):
            loc = np.einsum("qi,eqj,eq->eij", self.psi, self.grads[..., c], self.qw)
            blocks.append(_scatter(loc, self.cell_dofs_p, self.cell_dofs, (self.n1, self.n2)))
        return sps.hstack(blocks).tocsr()

    @cached_property
    def coupling(self):
        """Matrix of ``integral sigma : grad v`` (velocity rows, stress columns)."""
        E1, E2 = self._derivative_mass
        return sps.bmat([[E1, E2, None], [None, E1, E2]]).tocsr()

    @cached_property
    def velocity_gram(self):
        return sps.block_diag([self.stiffness, self.stiffness]).tocsr()

    @cached_property
    def stress_l2_gram(self):
        return sps.block_diag([w * self.mass for w in FROB_WEIGHTS]).tocsr()

    @cached_property
    def stress_h1_semigram(self):
        return sps.block_diag([w * self.stiffness for w in FROB_WEIGHTS]).tocsr()

    @cached_property
    def stress_gram(self):
        return (self.stress_l2_gram + self.stress_h1_semigram).tocsr()

    @cached_property
    def velocity_gram_free(self):
        f = self.vel_free
        return self.velocity_gram[f][:, f].tocsc()

    @cached_property
    def scalar_stiffness_lu(self):
        f = self.scalar_free
        return _factor(self.stiffness[f][:, f])

    @cached_property
    def velocity_gram_lu(self):
        return _factor(self.velocity_gram_free)

    @cached_property
    def stress_gram_lu(self):
        return _factor(self.stress_gram)

    @cached_property
    def scalar_h1_gram(self):
        return (self.mass + self.stiffness).tocsr()

    @cached_property
    def scalar_h1_lu(self):
        return _factor(self.scalar_h1_gram)

    @cached_property
    def stokes_projector_lu(self):
        """Factor of ``[[K, -B^T, 0], [-B, 0, m], [0, m^T, 0]]`` on free velocity dofs."""
        f = self.vel_free
        K = self.velocity_gram_free
        B = self.divergence[:, f]
        m = sps.csr_matrix(self.pressure_mean_vector.reshape(-1, 1))
        mat = sps.bmat([[K, -B.T, None], [-B, None, m], [None, m.T, None]])
        return _factor(mat)

    def solve_stokes_projector(self, rhs_free):
        """Return ``z`` (free dofs) with ``(z, v)_V = rhs(v)`` for all discretely div-free ``v``."""
        nf = len(self.vel_free)
        rhs = np.zeros(nf + self.n1 + 1)
        rhs[:nf] = rhs_free
        sol = self.stokes_projector_lu.solve(rhs)
        return sol[:nf]

    def project_divfree(self, u):
        """V-orthogonal projection of a velocity onto the discretely div-free subspace."""
        f = self.vel_free
        z = np.zeros(self.n_velocity)
        z[f] = self.solve_stokes_projector(self.velocity_gram_free @ np.asarray(u)[f])
        return z


@dataclass
class State:
    u: np.ndarray
    p: np.ndarray
    s: np.ndarray

    @classmethod
    def zeros(cls, sp: FunctionSpaces):
        return cls(np.zeros(sp.n_velocity), np.zeros(sp.n_pressure), np.zeros(sp.n_stress))

    def copy(self):
        return State(self.u.copy(), self.p.copy(), self.s.copy())

    def __sub__(self, other):
        return State(self.u - other.u, self.p - other.p, self.s - other.s)

    def scaled(self, c):
        return State(c * self.u, c * self.p, c * self.s)

    def to_vector(self):
        return np.concatenate([self.u, self.p, self.s])

    @classmethod
    def from_vector(cls, sp, vec):
        nu, npr = sp.n_velocity, sp.n_pressure
        return cls(vec[:nu].copy(), vec[nu : nu + npr].copy(), vec[nu + npr :].copy())


def random_state(sp: FunctionSpaces, rng, kind="smooth", divfree=True, modes=4):
    """Random discrete state with zero boundary velocity and zero pressure.

    ``kind="smooth"`` combines low Fourier modes at the dof points;
    ``kind="rough"`` draws independent Gaussian dof values.
    """
    x, y = sp.dof_coords[:, 0], sp.dof_coords[:, 1]

    def field():
        if kind == "rough":
            return rng.standard_normal(sp.n2)
        out = np.zeros(sp.n2)
        for _ in range(modes):
            kx, ky = rng.integers(0, 4, size=2)
            ph = rng.uniform(0, 2 * np.pi, size=2)
            out += rng.standard_normal() * np.cos(np.pi * kx * x + ph[0]) * np.cos(np.pi * ky * y + ph[1])
        return out

    u = np.concatenate([field(), field()])
    u[sp.vel_boundary_mask] = 0.0
    if divfree:
        u = sp.project_divfree(u)
    s = np.concatenate([field(), field(), field()])
    return State(u, np.zeros(sp.n_pressure), s)


# --- parameter-dependent assembly ----------------------------------------------

@dataclass(frozen=True)
class StokesBlocks:
    viscous: sps.csr_matrix
    divergence: sps.csr_matrix
    coupling: sps.csr_matrix


@dataclass(frozen=True)
class StressBlocks:
    mass: sps.csr_matrix
    diffusion: sps.csr_matrix
    transport: sps.csr_matrix
    ga: sps.csr_matrix
    source: sps.csr_matrix

    @property
    def lhs(self):
        return (self.mass + self.diffusion + self.transport + self.ga).tocsr()


def assemble_stokes_blocks(sp: FunctionSpaces, p: FluidParams) -> StokesBlocks:
    return StokesBlocks((1.0 - p.r) * sp.velocity_gram, sp.divergence, sp.coupling)


def _advection(sp, u):
    """Scalar matrix ``A[i, j] = integral (w . grad phi_j) phi_i``."""
    w = sp.eval_velocity(u)
    loc = np.einsum("eqd,eqjd,qi,eq->eij", w, sp.grads, sp.phi, sp.qw)
    return _scatter(loc, sp.cell_dofs, sp.cell_dofs, (sp.n2, sp.n2))


def _skew_advection(sp, u):
    A = _advection(sp, u)
    return (0.5 * (A - A.T)).tocsr()


def assemble_convection(sp: FunctionSpaces, u) -> sps.csr_matrix:
    """Skew convection operator ``N(u)`` on the velocity layout (without Re)."""
    S = _skew_advection(sp, u)
    return sps.block_diag([S, S]).tocsr()


def stress_transport(sp, u):
    S = _skew_advection(sp, u)
    return sps.block_diag([w * S for w in FROB_WEIGHTS]).tocsr()


def ga_operator(sp, u, a):
    """Matrix of ``integral g_a(grad u, sigma) : tau`` (without We)."""
    G = sp.eval_velocity_grad(u)
    basis = [sym_from_components(1, 0, 0), sym_from_components(0, 1, 0), sym_from_components(0, 0, 1)]
    # L[e, q, a, b]: component a of g_a(G, E_b)
    L = np.stack([np.stack(sym_components(eval_g_a(G, E, a)), axis=-1) for E in basis], axis=-1)
    L = L * FROB_WEIGHTS[None, None, :, None]
    loc = np.einsum("eqab,qi,qj,eq->eabij", L, sp.phi, sp.phi, sp.qw)
    n2 = sp.n2
    blocks = [[_scatter(loc[:, i, j], sp.cell_dofs, sp.cell_dofs, (n2, n2)) for j in range(3)] for i in range(3)]
    return sps.bmat(blocks).tocsr()


def assemble_stress_blocks(sp: FunctionSpaces, p: FluidParams, u) -> StressBlocks:
    return StressBlocks(
        mass=sp.stress_l2_gram,
        diffusion=p.diff * sp.stress_h1_semigram,
        transport=p.we * stress_transport(sp, u),
        ga=p.we * ga_operator(sp, u, p.a),
        source=(2.0 * p.r * sp.coupling.T).tocsr(),
    )


def prolong_scalar(coarse: FunctionSpaces, fine: FunctionSpaces, vec):
    """Exact P2 prolongation onto a uniformly refined mesh (uses ``mesh.parent``)."""
    parent = fine.mesh.parent
    if parent is None:
        raise ValueError("fine mesh carries no parent map")
    xp = coarse.mesh.vertices[coarse.mesh.triangles[parent]]  # (nt_fine, 3, 2)
    J = np.stack([xp[:, 1] - xp[:, 0], xp[:, 2] - xp[:, 0]], axis=2)
    pts = fine.dof_coords[fine.cell_dofs]  # (nt_fine, 6, 2)
    ref = np.einsum("ekd,eqd->eqk", np.linalg.inv(J), pts - xp[:, None, 0])
    phi, _ = p2_basis(ref.reshape(-1, 2))
    phi = phi.reshape(len(parent), 6, 6)
    vals = np.einsum("eqi,ei->eq", phi, np.asarray(vec)[coarse.cell_dofs[parent]])
    out = np.empty(fine.n2)
    out[fine.cell_dofs.ravel()] = vals.ravel()
    return out


def export_coo(matrix, path):
    """Write a sparse matrix as ``i j value`` lines."""
    coo = sps.coo_matrix(matrix)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i, j, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
            fh.write(f"{i} {j} {v!r}\n")


# --- loads and norms -------------------------------------------------------------

def load_vector(sp: FunctionSpaces, f) -> np.ndarray:
    """``<f, v>`` for every velocity basis function.

    ``f`` is ``None``, a callable ``f(x, y) -> (f1, f2)`` or a velocity-layout
    P2 coefficient vector.
    """
    if f is None:
        return np.zeros(sp.n_velocity)
    if callable(f):
        x, y = sp.qpts[..., 0], sp.qpts[..., 1]
        vals = [np.broadcast_to(np.asarray(c, dtype=float), x.shape) for c in f(x, y)]
    else:
        vals = list(np.moveaxis(sp.eval_velocity(f), -1, 0))
    out = []
    for c in range(2):
        loc = np.einsum("eq,qi,eq->ei", vals[c], sp.phi, sp.qw)
        out.append(np.bincount(sp.cell_dofs.ravel(), loc.ravel(), minlength=sp.n2))
    return np.concatenate(out)


def stress_load_vector(sp: FunctionSpaces, g) -> np.ndarray:
    """``(g, tau)`` in the Frobenius product for a callable ``g -> (g11, g12, g22)``."""
    if g is None:
        return np.zeros(sp.n_stress)
    x, y = sp.qpts[..., 0], sp.qpts[..., 1]
    vals = [np.broadcast_to(np.asarray(c, dtype=float), x.shape) for c in g(x, y)]
    out = []
    for c in range(3):
        loc = FROB_WEIGHTS[c] * np.einsum("eq,qi,eq->ei", vals[c], sp.phi, sp.qw)
        out.append(np.bincount(sp.cell_dofs.ravel(), loc.ravel(), minlength=sp.n2))
    return np.concatenate(out)


def norm_V(sp, u) -> float:
    u = np.asarray(u)
    return float(np.sqrt(max(u @ (sp.velocity_gram @ u), 0.0)))


def norm_W(sp, s) -> float:
    s = np.asarray(s)
    return float(np.sqrt(max(s @ (sp.stress_gram @ s), 0.0)))


def norm_X(sp, state: State, r: float) -> float:
    return float(np.sqrt(2.0 * r * norm_V(sp, state.u) ** 2 + norm_W(sp, state.s) ** 2))


def inner_X(sp, a: State, b: State, r: float) -> float:
    return float(2.0 * r * a.u @ (sp.velocity_gram @ b.u) + a.s @ (sp.stress_gram @ b.s))


def norm_L4(sp, s) -> float:
    """L4 norm of the pointwise Frobenius norm of a stress field."""
    S = sp.eval_stress(s)
    fro2 = np.einsum("eqij,eqij->eq", S, S)
    return float(sp.integrate(fro2**2) ** 0.25)


def scalar_norm_L4(sp, v) -> float:
    return float(sp.integrate(sp.eval_scalar(v) ** 4) ** 0.25)


def scalar_norm_H1(sp, v) -> float:
    v = np.asarray(v)
    return float(np.sqrt(v @ ((sp.mass + sp.stiffness) @ v)))


def h_minus1_norm(f, sp: FunctionSpaces) -> float:
    """Discrete dual norm of ``f`` over the P2 velocity space with zero trace.

    The Riesz representative solves ``-Δw = f`` componentwise; the result is
    ``||grad w||_L2``.
    """
    b = load_vector(sp, f).reshape(2, sp.n2)[:, sp.scalar_free]
    total = 0.0
    for c in range(2):
        w = sp.scalar_stiffness_lu.solve(b[c])
        total += b[c] @ w
    return float(np.sqrt(max(total, 0.0)))


# --- the Galerkin map and residuals ----------------------------------------------

def _functionals(sp, state: State, p: FluidParams, F, G=None):
    """Momentum (without pressure) and stress residual vectors for load vectors ``F``, ``G``."""
    u, s = state.u, state.s
    mom = (1.0 - p.r) * (sp.velocity_gram @ u) + sp.coupling @ s - F
    if p.re:
        mom = mom + p.re * (assemble_convection(sp, u) @ u)
    blocks = assemble_stress_blocks(sp, p, u)
    st = blocks.lhs @ s - blocks.source @ u
    if G is not None:
        st = st - G
    return mom, st


def pk_functional(sp, state: State, p: FluidParams, f, F=None):
    """Coefficient vectors of the functional ``(P_k(xi), .)_X`` on (velocity, stress).

    ``F`` is an optional precomputed load vector that replaces ``f``.
    """
    mom, st = _functionals(sp, state, p, load_vector(sp, f) if F is None else F)
    mom = 2.0 * p.r * mom
    mom[sp.vel_boundary_mask] = 0.0
    return mom, st


def apply_Pk(sp, state: State, p: FluidParams, f) -> State:
    """Riesz representative of the Galerkin map in the X inner product.

    The velocity part lives in the discretely div-free subspace; the pressure
    slot of the returned state is zero.
    """
    mom, st = pk_functional(sp, state, p, f)
    z = np.zeros(sp.n_velocity)
    z[sp.vel_free] = sp.solve_stokes_projector(mom[sp.vel_free]) / (2.0 * p.r)
    zeta = sp.stress_gram_lu.solve(st)
    return State(z, np.zeros(sp.n_pressure), zeta)


def pk_pairing(sp, state: State, p: FluidParams, f, F=None) -> float:
    mom, st = pk_functional(sp, state, p, f, F)
    return float(mom @ state.u + st @ state.s)


def energy_terms(sp, state: State, p: FluidParams, f) -> dict:
    """Term-by-term expansion of the energy identity for the pairing."""
    u, s = state.u, state.s
    F = load_vector(sp, f)
    return {
        "viscous": 2.0 * p.r * (1.0 - p.r) * float(u @ (sp.velocity_gram @ u)),
        "stress_l2": float(s @ (sp.stress_l2_gram @ s)),
        "stress_diffusion": p.diff * float(s @ (sp.stress_h1_semigram @ s)),
        "ga": p.we * float(s @ (ga_operator(sp, u, p.a) @ s)) if p.we else 0.0,
        "forcing": -2.0 * p.r * float(F @ u),
    }


def energy_identity(sp, state: State, p: FluidParams, f) -> float:
    return float(sum(energy_terms(sp, state, p, f).values()))


def weak_residual(sp, state: State, p: FluidParams, f, g=None):
    """Dual norms of the momentum (in V') and stress (in W') weak residuals.

    ``g`` is the verification-only extra stress source.
    """
    G = None if g is None else stress_load_vector(sp, g)
    return residual_norms(sp, state, p, load_vector(sp, f), G)


def residual_norms(sp, state: State, p: FluidParams, F, G=None):
    """:func:`weak_residual` with precomputed load vectors."""
    mom, st = _functionals(sp, state, p, F, G)
    mom = mom - sp.divergence.T @ state.p
    r = mom[sp.vel_free]
    mom_norm = float(np.sqrt(max(r @ sp.velocity_gram_lu.solve(r), 0.0)))
    st_norm = float(np.sqrt(max(st @ sp.stress_gram_lu.solve(st), 0.0)))
    return mom_norm, st_norm


def inf_sup_constant(sp: FunctionSpaces) -> float:
    """Smallest nonzero generalized singular value of the divergence block.

    Solves ``B K^{-1} B^T q = mu M_p q`` densely and returns ``sqrt(mu_min)``
    over pressures orthogonal to constants. Intended for small meshes.
    """
    from scipy.linalg import eigh

    f = sp.vel_free
    B = sp.divergence[:, f]
    X = sp.velocity_gram_lu.solve(B.T.toarray())
    S = B @ X
    S = 0.5 * (S + S.T)
    Mp = sp.pressure_mass.toarray()
    mu = eigh(S, Mp, eigvals_only=True)
    return float(np.sqrt(max(mu[1], 0.0)))
