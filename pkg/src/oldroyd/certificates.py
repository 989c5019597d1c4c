"""Discrete Sobolev constant and the existence / energy / uniqueness certificates.

Every certified inequality here is a statement about the discrete spaces:
C_Omega,h and ||f||_{H^-1},h are computed on the mesh the solution lives on.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .discretization import (
    FunctionSpaces,
    State,
    ga_operator,
    h_minus1_norm,
    load_vector,
    norm_L4,
    norm_V,
    norm_W,
    norm_X,
    pk_pairing,
    prolong_scalar,
    random_state,
    scalar_norm_L4,
)
from .errors import C1ExceedsOneError, NoConvergence
from .model import FluidParams, Constants, compute_constants, uniqueness_AB

log = logging.getLogger(__name__)

SCOPE = (
    "discrete certificate: constants C_Omega,h and ||f||_H-1,h are computed on the "
    "finite element space; transport terms are skew-symmetrized and the divergence "
    "constraint is imposed weakly (Taylor-Hood)"
)


# --- Sobolev constant ---------------------------------------------------------------

@dataclass
class SobolevEstimate:
    value: float
    scalar_value: float
    maximizer: np.ndarray = field(repr=False)
    start_ratios: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    audit_max_ratio: float = 0.0
    raised_by_audit: bool = False

    def __float__(self):
        return float(self.value)


def _cubic_load(sp, tau):
    vals = sp.eval_scalar(tau) ** 3
    loc = np.einsum("eq,qi,eq->ei", vals, sp.phi, sp.qw)
    return np.bincount(sp.cell_dofs.ravel(), loc.ravel(), minlength=sp.n2)


def _ascent(sp, tau, max_iter, rtol):
    """Normalized fixed-point ascent for max ||tau||_L4 / ||tau||_H1.

    Each step maximizes the linearization of the convex functional
    ``||tau||_L4^4`` over the H1 unit sphere, so the ratio never decreases.
    """
    K = sp.scalar_h1_gram
    tau = tau / math.sqrt(tau @ (K @ tau))
    ratio = scalar_norm_L4(sp, tau)
    for it in range(1, max_iter + 1):
        z = sp.scalar_h1_lu.solve(_cubic_load(sp, tau))
        tau = z / math.sqrt(z @ (K @ z))
        new = scalar_norm_L4(sp, tau)
        if abs(new - ratio) <= rtol * new:
            return tau, new, it
        ratio = new
    raise NoConvergence(f"Sobolev ascent did not stabilize in {max_iter} iterations")


def tensor_ratio(sp, s):
    return norm_L4(sp, s) / norm_W(sp, s)


def random_tensor_fields(sp, rng, n):
    for k in range(n):
        kind = "rough" if k % 2 else "smooth"
        yield random_state(sp, rng, kind=kind, divfree=False).s


def sobolev_constant(sp: FunctionSpaces, n_restarts=5, seed=0, max_iter=2000, rtol=1e-13,
                     warm_starts=(), audit_samples=1000) -> SobolevEstimate:
    """Estimate C_Omega,h = max ||tau||_L4 / ||tau||_W over the discrete space.

    The maximization runs on scalar P2 fields from the constant field,
    ``n_restarts`` random fields and any ``warm_starts``; a random tensor-field
    audit then guards the transfer to symmetric tensors, raising the value to
    any larger observed ratio.
    """
    rng = np.random.default_rng(seed)
    starts = [np.ones(sp.n2)]
    for k in range(n_restarts):
        st = random_state(sp, rng, kind="smooth", divfree=False)
        starts.append(st.s[: sp.n2] + (0.5 + k) * np.ones(sp.n2) * (k % 2))
    starts.extend(np.asarray(w, dtype=float) for w in warm_starts)

    best, best_tau, ratios, its = -1.0, None, [], []
    for tau0 in starts:
        tau, ratio, it = _ascent(sp, tau0, max_iter, rtol)
        ratios.append(ratio)
        its.append(it)
        if ratio > best:
            best, best_tau = ratio, tau
    est = SobolevEstimate(best, best, best_tau, ratios, its)

    audit = 0.0
    for s in random_tensor_fields(sp, rng, audit_samples):
        audit = max(audit, tensor_ratio(sp, s))
    # fields built from the scalar maximizer in each tensor slot
    z = np.zeros(sp.n2)
    for comps in ((best_tau, z, z), (z, best_tau, z), (best_tau, z, best_tau)):
        audit = max(audit, tensor_ratio(sp, np.concatenate(comps)))
    est.audit_max_ratio = audit
    if audit > est.value:
        log.warning("tensor audit raised C_Omega,h from %.6g to %.6g", est.value, audit)
        est.value = audit
        est.raised_by_audit = True
    return est


def estimate_c_omega(sp: FunctionSpaces, **opts) -> float:
    return sobolev_constant(sp, **opts).value


def c_omega_under_refinement(spaces, **opts):
    """Estimates on a nested sequence, each level warm-started from the previous maximizer."""
    out = []
    prev = None
    for k, sp in enumerate(spaces):
        warm = ()
        if prev is not None:
            warm = (prolong_scalar(spaces[k - 1], sp, prev.maximizer),)
        est = sobolev_constant(sp, warm_starts=warm, **opts)
        out.append(est)
        prev = est
    return out


# --- certificates ------------------------------------------------------------------

@dataclass
class Certificate:
    c_omega_h: float
    f_norm_h: float
    constants: Constants
    existence_ok: bool
    uniqueness_ok: bool | None = None
    bound_ok: bool | None = None
    branch: str | None = None
    norm_x: float | None = None
    slack: float | None = None
    slack_tol: float = 1e-8
    uniqueness: dict | None = None
    mesh: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    scope: str = SCOPE

    def to_dict(self):
        d = asdict(self)
        d["constants"] = self.constants.to_dict()
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), indent=2, **kw)


def mesh_info(sp: FunctionSpaces) -> dict:
    m = sp.mesh
    return {"n_vertices": m.n_vertices, "n_triangles": m.n_triangles, "h": m.h(),
            "velocity_dofs": sp.n_velocity, "pressure_dofs": sp.n_pressure, "stress_dofs": sp.n_stress}


def uniqueness_certificate(p: FluidParams, c_omega_h: float, c2: float, f_norm_h: float | None = None) -> dict:
    """A/B coefficients, the verdict, and how much room each sufficient condition has.

    ``forcing_margin`` is the largest factor on ||f|| (through C_II, which is
    linear in ||f|| to first order) keeping A, B > 0; ``flow_margin`` the largest
    joint factor on (Re, We). The condition with the larger margin is recorded
    as the one exercised.
    """
    uq = uniqueness_AB(p, c_omega_h, c2)
    frag = {"a_coef": uq.a_coef, "b_coef": uq.b_coef, "ok": uq.ok, "re_zero_fallback": uq.fallback}
    if not uq.ok:
        frag["exercised"] = None
        return frag

    def ok_forcing(lam):
        if f_norm_h is None:
            return uniqueness_AB(p, c_omega_h, lam * c2).ok
        consts = compute_constants(p, c_omega_h, lam * f_norm_h)
        return consts.c2 is not None and consts.a_coef > 0 and consts.b_coef > 0

    def ok_flow(lam):
        q = p.replace(re=lam * p.re, we=lam * p.we)
        if f_norm_h is None:
            return uniqueness_AB(q, c_omega_h, c2).ok
        consts = compute_constants(q, c_omega_h, f_norm_h)
        return consts.c2 is not None and consts.a_coef > 0 and consts.b_coef > 0

    frag["forcing_margin"] = _growth_margin(ok_forcing) if c2 > 0 else math.inf
    frag["flow_margin"] = _growth_margin(ok_flow) if (p.re > 0 or p.we > 0) else math.inf
    frag["exercised"] = "a" if frag["forcing_margin"] >= frag["flow_margin"] else "b"
    return frag


def _growth_margin(ok, cap=1e6):
    if ok(cap):
        return math.inf
    lo, hi = 1.0, cap
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        if hi / lo < 1 + 1e-9:
            break
    return lo


def certify(sp: FunctionSpaces, p: FluidParams, f, c_omega_h: float | None = None,
            f_norm_h: float | None = None, seed: int = 0) -> Certificate:
    """Existence and uniqueness verdicts without a solve."""
    if c_omega_h is None:
        c_omega_h = estimate_c_omega(sp, seed=seed)
    if f_norm_h is None:
        f_norm_h = h_minus1_norm(f, sp)
    consts = compute_constants(p, c_omega_h, f_norm_h)
    cert = Certificate(c_omega_h, f_norm_h, consts, existence_ok=consts.existence_ok,
                       mesh=mesh_info(sp), seeds={"c_omega": seed})
    if consts.existence_ok:
        cert.uniqueness = uniqueness_certificate(p, c_omega_h, consts.c2, f_norm_h)
        cert.uniqueness_ok = cert.uniqueness["ok"]
        if consts.degenerate:
            cert.notes.append("zero forcing: C_II = 0 (degenerate ball radius)")
        if consts.re_zero_fallback:
            cert.notes.append("Re = 0: uniqueness uses the r(1-r) Young split")
    else:
        cert.uniqueness_ok = False
        cert.notes.append(f"C_I,h = {consts.c1:.6g} > 1: existence threshold not met")
    return cert


def classify_branch(norm_x: float, consts: Constants, atol=1e-12) -> str:
    if norm_x <= consts.c2 * (1 + 1e-12) + atol:
        return "small-root"
    if consts.c2_large is not None and norm_x >= consts.c2_large:
        return "large-root"
    return "degenerate"


def energy_certificate(sp: FunctionSpaces, state: State, p: FluidParams, f, c_omega_h: float,
                       f_norm_h: float | None = None, slack_tol: float = 1e-8, seed: int = 0) -> Certificate:
    """Check ``2r ||u||_V^2 + ||sigma||_W^2 <= C_II,h^2 + slack_tol`` for a converged state.

    Raises :class:`C1ExceedsOneError` when C_I,h > 1.
    """
    cert = certify(sp, p, f, c_omega_h, f_norm_h, seed)
    if not cert.existence_ok:
        raise C1ExceedsOneError(cert.constants.c1)
    c2 = cert.constants.c2
    nx = norm_X(sp, state, p.r)
    cert.norm_x = nx
    cert.slack = nx * nx - c2 * c2
    cert.slack_tol = slack_tol
    cert.bound_ok = bool(cert.slack <= slack_tol)
    cert.branch = classify_branch(nx, cert.constants)
    if p.a == 0:
        cert.notes.append("corotational: C_II = sqrt(2r) ||f|| / min(1-r, D)")
    return cert


# --- sampling checks ---------------------------------------------------------------

@dataclass
class SphereReport:
    radius: float
    n_samples: int
    min_pairing: float
    eps: float
    passed: bool
    pairings: list = field(default_factory=list, repr=False)


def sphere_sign_test(sp: FunctionSpaces, p: FluidParams, f, n_samples: int = 100, seed: int = 0,
                     c_omega_h: float | None = None, f_norm_h: float | None = None,
                     radius: float | None = None) -> SphereReport:
    """Sample ``(P(xi), xi)_X`` on the sphere ``||xi||_X = C_II,h``.

    For zero forcing C_II,h = 0 and any radius in (0, beta/alpha) is admissible;
    ``min(1, beta / (2 alpha))`` is used.
    """
    if c_omega_h is None:
        c_omega_h = estimate_c_omega(sp, seed=seed)
    if f_norm_h is None:
        f_norm_h = h_minus1_norm(f, sp)
    consts = compute_constants(p, c_omega_h, f_norm_h)
    if not consts.existence_ok:
        raise C1ExceedsOneError(consts.c1)
    if radius is None:
        radius = consts.c2
        if radius == 0.0:
            radius = 1.0 if consts.alpha == 0 else min(1.0, consts.beta / (2 * consts.alpha))
    eps = 1e-10 * (1.0 + radius**3)
    rng = np.random.default_rng(seed)
    F = load_vector(sp, f)
    vals = []
    for k in range(n_samples):
        st = random_state(sp, rng, kind="rough" if k % 2 else "smooth")
        st = st.scaled(radius / norm_X(sp, st, p.r))
        vals.append(pk_pairing(sp, st, p, None, F))
    m = float(min(vals))
    return SphereReport(radius, n_samples, m, eps, m >= -eps, vals)


def est1_violations(sp, a, c_omega_h, n_samples=100, seed=0):
    """Count samples violating ``|(G_a(u) s, s)| <= 2|a| C^2 ||u||_V ||s||_W^2``."""
    rng = np.random.default_rng(seed)
    worst, bad = 0.0, 0
    for k in range(n_samples):
        st = random_state(sp, rng, kind="rough" if k % 2 else "smooth")
        lhs = abs(st.s @ (ga_operator(sp, st.u, a) @ st.s))
        rhs = 2 * abs(a) * c_omega_h**2 * norm_V(sp, st.u) * norm_W(sp, st.s) ** 2
        worst = max(worst, lhs / rhs if rhs > 0 else (0.0 if lhs < 1e-14 else math.inf))
        if lhs > rhs * (1 + 1e-12) + 1e-15:
            bad += 1
    return bad, worst


def energy_chain_gap(sp, state: State, p: FluidParams, f, c_omega_h: float, f_norm_h: float):
    """RHS minus LHS of the coercivity chain bounding a solution's energy.

    ``2r(1-r)||u||^2 + min(1,D)||s||^2 <= 2r ||f|| ||u|| + 2|a| C^2 We ||u|| ||s||^2``.
    """
    nv, nw = norm_V(sp, state.u), norm_W(sp, state.s)
    lhs = 2 * p.r * (1 - p.r) * nv**2 + min(1.0, p.diff) * nw**2
    rhs = 2 * p.r * f_norm_h * nv + 2 * abs(p.a) * c_omega_h**2 * p.we * nv * nw**2
    return rhs - lhs
