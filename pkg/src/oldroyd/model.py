"""Physical parameters, pointwise tensor algebra and closed-form constants.

Tensors are plain numpy arrays with trailing shape ``(2, 2)``; every function
broadcasts over leading axes so the same code serves pointwise checks and
quadrature-point assembly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import C1ExceedsOneError, ParameterError

RE_ZERO_THRESHOLD = 1e-12


@dataclass(frozen=True)
class FluidParams:
    """Dimensionless parameters of the diffusive Oldroyd model.

    ``diff`` is the stress diffusivity D, ``r`` the retardation parameter and
    ``a`` the slip parameter of the objective derivative.
    """

    re: float = 0.0
    we: float = 0.0
    r: float = 0.5
    a: float = 0.0
    diff: float = 1.0

    def __post_init__(self):
        for name in ("re", "we", "r", "a", "diff"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.re < 0:
            raise ParameterError(f"re must be >= 0, got {self.re}")
        if self.we < 0:
            raise ParameterError(f"we must be >= 0, got {self.we}")
        if not 0.0 < self.r < 1.0:
            raise ParameterError(f"r must lie in (0, 1), got {self.r}")
        if abs(self.a) > 1.0:
            raise ParameterError(f"a must lie in [-1, 1], got {self.a}")
        if self.diff <= 0:
            raise ParameterError(f"diff must be > 0, got {self.diff}")

    def replace(self, **changes) -> "FluidParams":
        return FluidParams(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)


# --- pointwise tensor algebra -------------------------------------------------

def sym_skew_parts(G):
    """Split a velocity gradient into symmetric part D and skew part W."""
    G = np.asarray(G, dtype=float)
    Gt = np.swapaxes(G, -1, -2)
    return 0.5 * (G + Gt), 0.5 * (G - Gt)


def sym_from_components(s11, s12, s22):
    s11, s12, s22 = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (s11, s12, s22)))
    out = np.empty(s11.shape + (2, 2))
    out[..., 0, 0] = s11
    out[..., 0, 1] = s12
    out[..., 1, 0] = s12
    out[..., 1, 1] = s22
    return out


def sym_components(S):
    S = np.asarray(S, dtype=float)
    return S[..., 0, 0], S[..., 0, 1], S[..., 1, 1]


def eval_g_a(G, S, a):
    """Objective-derivative coupling ``W S - S W + a (D S + S D)``.

    ``G`` is the velocity gradient (``G[i, j] = d u_i / d x_j``) and ``S`` a
    symmetric stress. The result is symmetrized by mirroring the upper entry
    so that it is exactly symmetric in floating point.
    """
    S = np.asarray(S, dtype=float)
    D, W = sym_skew_parts(G)
    out = W @ S - S @ W + a * (D @ S + S @ D)
    out[..., 1, 0] = out[..., 0, 1]
    return out


def frobenius(A, B):
    return np.einsum("...ij,...ij->...", A, B)


# --- closed-form constants ------------------------------------------------------

def constants_abc(p: FluidParams, c_omega: float, f_norm: float):
    """Coefficients of the cubic lower bound on the energy pairing.

    Returns ``(alpha, beta, gamma)`` such that the pairing is bounded below by
    ``x * (-alpha x**2 + beta x - gamma)`` at ``x = ||xi||_X``.
    """
    if c_omega <= 0:
        raise ParameterError("c_omega must be positive")
    if f_norm < 0:
        raise ParameterError("f_norm must be nonnegative")
    alpha = math.sqrt(2.0) * abs(p.a) * c_omega**2 * p.we / math.sqrt(p.r)
    beta = min(1.0 - p.r, p.diff)
    gamma = math.sqrt(2.0 * p.r) * f_norm
    return alpha, beta, gamma


def compute_c1(p: FluidParams, c_omega: float, f_norm: float) -> float:
    if c_omega <= 0:
        raise ParameterError("c_omega must be positive")
    if f_norm < 0:
        raise ParameterError("f_norm must be nonnegative")
    beta = min(1.0 - p.r, p.diff)
    return 8.0 * abs(p.a) * c_omega**2 * p.we * f_norm / beta**2


def c2_closed_form(p: FluidParams, c_omega: float, f_norm: float) -> float:
    """C_II from its direct definition in terms of C_I.

    ``1 - sqrt(1 - c1)`` is evaluated as ``c1 / (1 + sqrt(1 - c1))`` to avoid
    cancellation for small C_I.
    """
    c1 = compute_c1(p, c_omega, f_norm)
    if c1 > 1.0:
        raise C1ExceedsOneError(c1)
    beta = min(1.0 - p.r, p.diff)
    denom = 4.0 * abs(p.a) * c_omega**2 * p.we
    if denom == 0.0 or c1 == 0.0:
        return math.sqrt(2.0 * p.r) * f_norm / beta
    return math.sqrt(2.0 * p.r) * beta / denom * (c1 / (1.0 + math.sqrt(1.0 - c1)))


def quadratic_roots(alpha: float, beta: float, gamma: float):
    """Roots of ``alpha x^2 - beta x + gamma`` as (small, large).

    The small root uses the cancellation-free form ``2 gamma / (beta + sqrt(disc))``.
    ``alpha == 0`` gives ``(gamma / beta, inf)``.
    """
    if alpha == 0.0:
        return gamma / beta, math.inf
    disc = beta * beta - 4.0 * alpha * gamma
    if disc < 0.0:
        raise C1ExceedsOneError(4.0 * alpha * gamma / beta**2)
    sq = math.sqrt(disc)
    return 2.0 * gamma / (beta + sq), (beta + sq) / (2.0 * alpha)


def compute_c2(p: FluidParams, c_omega: float, f_norm: float) -> float:
    """Radius of the a-priori ball, the smaller root of the pairing bound.

    Raises :class:`C1ExceedsOneError` when C_I > 1. Returns 0 for zero
    forcing (the degenerate case; see :func:`compute_constants`).
    """
    c1 = compute_c1(p, c_omega, f_norm)
    if c1 > 1.0:
        raise C1ExceedsOneError(c1)
    if f_norm == 0.0:
        return 0.0
    alpha, beta, gamma = constants_abc(p, c_omega, f_norm)
    return quadratic_roots(alpha, beta, gamma)[0]


@dataclass(frozen=True)
class UniquenessCoefficients:
    a_coef: float
    b_coef: float
    fallback: bool = False

    @property
    def ok(self) -> bool:
        return self.a_coef > 0 and self.b_coef > 0


def uniqueness_AB(p: FluidParams, c_omega: float, c2: float) -> UniquenessCoefficients:
    """Coefficients whose positivity rules out a second solution.

    For ``re`` below ``RE_ZERO_THRESHOLD`` the Young split weighted by ``Re``
    is singular; the split is then taken against ``r (1 - r) ||u||_V^2`` and
    the result carries ``fallback=True``.
    """
    k = c_omega**2 * c2 / math.sqrt(2.0 * p.r)
    mind = min(1.0, p.diff)
    if p.re < RE_ZERO_THRESHOLD:
        a_coef = 0.5 * (1.0 - p.r)
        b_coef = mind - k * (9.0 * p.we**2 * k / (2.0 * (1.0 - p.r)) + 2.0 * abs(p.a) * p.we)
        return UniquenessCoefficients(a_coef, b_coef, fallback=True)
    a_coef = (1.0 - p.r) - 4.0 * p.re * k
    b_coef = mind - k * (9.0 * p.we**2 / (4.0 * p.re) + 2.0 * abs(p.a) * p.we)
    return UniquenessCoefficients(a_coef, b_coef)


@dataclass(frozen=True)
class Constants:
    alpha: float
    beta: float
    gamma: float
    c_omega: float
    f_norm: float
    c1: float
    c2: float | None
    a_coef: float | None
    b_coef: float | None
    c2_large: float | None = None
    degenerate: bool = False
    re_zero_fallback: bool = False

    @property
    def existence_ok(self) -> bool:
        return self.c1 <= 1.0

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["c2_large"] is not None and math.isinf(d["c2_large"]):
            d["c2_large"] = None
        return d


def compute_constants(p: FluidParams, c_omega: float, f_norm: float) -> Constants:
    """Every constant of the existence/uniqueness theory in one record.

    When C_I > 1 the C_II-dependent fields are ``None`` instead of raising.
    """
    alpha, beta, gamma = constants_abc(p, c_omega, f_norm)
    c1 = compute_c1(p, c_omega, f_norm)
    if c1 > 1.0:
        return Constants(alpha, beta, gamma, c_omega, f_norm, c1, None, None, None)
    c2 = compute_c2(p, c_omega, f_norm)
    large = quadratic_roots(alpha, beta, gamma)[1]
    uq = uniqueness_AB(p, c_omega, c2)
    return Constants(
        alpha, beta, gamma, c_omega, f_norm, c1, c2, uq.a_coef, uq.b_coef,
        c2_large=large, degenerate=(f_norm == 0.0), re_zero_fallback=uq.fallback,
    )
