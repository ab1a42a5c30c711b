"""Trigonometric Galerkin bases on the interval [-L, L].

Three orthonormal families are used by the solver:

* plant family ("plant_v"): pairs s_j(x) = L^{-1/2} sin((2j-1) pi x / 2L),
  c_j(x) = L^{-1/2} cos((2j-1) pi x / 2L), j = 1..m, optionally preceded by
  the constant mode (2L)^{-1/2}.  Members are extended by zero outside the
  interval.  Ordering: [constant?, s1, c1, s2, c2, ...].
* water family ("water_dirichlet"): psi_k(x) = L^{-1/2} sin(k pi (x+L) / 2L),
  k = 1..m; vanishes at both endpoints.
* derivative family ("deriv_w"): rho_k(x) = L^{-1/2} cos(k pi (x+L) / 2L);
  zero slope at the endpoints and zero mean.

Differentiation acts exactly within these spans: the plant family maps to
itself and the water family maps to the derivative family, which is what
lets the solver carry the spatial derivatives of u and w as independent
unknowns without ever differentiating numerically.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.polynomial.legendre import leggauss


class BasisKind(Enum):
    PLANT_V = "plant_v"
    WATER_DIRICHLET = "water_dirichlet"
    DERIV_W = "deriv_w"


@dataclass(frozen=True)
class BasisSet:
    kind: BasisKind
    m: int
    L: float
    include_constant: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("truncation level m must be >= 1")
        if not self.L > 0:
            raise ValueError("half-length L must be positive")
        if self.include_constant and self.kind is not BasisKind.PLANT_V:
            raise ValueError("only the plant family supports a constant mode")

    @property
    def dim(self):
        if self.kind is BasisKind.PLANT_V:
            return 2 * self.m + (1 if self.include_constant else 0)
        return self.m


@dataclass(frozen=True)
class QuadratureRule:
    """Composite Gauss-Legendre rule on [-L, L].

    Exact for polynomials of degree 2*order - 1 on each of ``panels``
    uniform panels.  The default sizing (panels = 2m + 4, order = 10)
    keeps the per-panel phase of the highest quartic trig product below
    2*pi, which integrates every Gram and nonlinear-projection entry to
    machine precision.
    """

    panels: int
    order: int
    L: float

    def __post_init__(self):
        if self.panels < 1 or self.order < 1:
            raise ValueError("panels and order must be positive")
        if not self.L > 0:
            raise ValueError("half-length L must be positive")
        xg, wg = leggauss(self.order)
        edges = np.linspace(-self.L, self.L, self.panels + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        halves = 0.5 * np.diff(edges)
        nodes = (mids[:, None] + halves[:, None] * xg[None, :]).ravel()
        weights = (halves[:, None] * wg[None, :]).ravel()
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)


def default_rule(m, L):
    return QuadratureRule(panels=2 * m + 4, order=10, L=L)


def _frequency(set_, index):
    """Angular frequency and sin/cos flag for a member, or None for the constant."""
    if set_.kind is BasisKind.PLANT_V:
        if set_.include_constant:
            if index == 0:
                return None
            index -= 1
        n = index // 2 + 1
        return (2 * n - 1) * np.pi / (2 * set_.L), index % 2 == 0
    k = index + 1
    omega = k * np.pi / (2 * set_.L)
    return omega, set_.kind is BasisKind.WATER_DIRICHLET


def eval_basis(set_, index, x):
    """Value of member ``index`` at point(s) x.

    Plant members are elements of the zero-extended space, hence 0 for
    |x| > L.  Water and derivative members are only defined on the
    interval; callers never evaluate them outside it.
    """
    if not 0 <= index < set_.dim:
        raise IndexError(f"basis index {index} out of range for dim {set_.dim}")
    x = np.asarray(x, dtype=float)
    L = set_.L
    freq = _frequency(set_, index)
    if freq is None:
        vals = np.full_like(x, 1.0 / np.sqrt(2.0 * L))
    else:
        omega, is_sin = freq
        arg = omega * x if set_.kind is BasisKind.PLANT_V else omega * (x + L)
        vals = (np.sin(arg) if is_sin else np.cos(arg)) / np.sqrt(L)
    if set_.kind is BasisKind.PLANT_V:
        vals = np.where(np.abs(x) > L, 0.0, vals)
    return vals if vals.ndim else float(vals)


def basis_matrix(set_, x):
    """All members evaluated at x, shape (dim, len(x))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.vstack([eval_basis(set_, j, x) for j in range(set_.dim)])


def companion_kind(set_):
    """Family containing the derivatives of ``set_``'s members."""
    if set_.kind is BasisKind.PLANT_V:
        return set_
    if set_.kind is BasisKind.WATER_DIRICHLET:
        return BasisSet(BasisKind.DERIV_W, set_.m, set_.L)
    raise ValueError("derivative family is not closed under differentiation")


def differentiation_matrix(set_):
    """Exact coefficient map c -> coefficients of d/dx synthesize(c).

    Plant: s_j -> omega_j c_j, c_j -> -omega_j s_j (constant -> 0), a map
    of the plant span into itself.  Water: psi_k -> omega_k rho_k, a map
    into the derivative family.  Entries are closed-form; no quadrature.
    """
    if set_.kind is BasisKind.DERIV_W:
        raise ValueError("derivative family is not closed under differentiation")
    if set_.kind is BasisKind.WATER_DIRICHLET:
        omegas = np.arange(1, set_.m + 1) * np.pi / (2.0 * set_.L)
        return np.diag(omegas)
    dim = set_.dim
    D = np.zeros((dim, dim))
    off = 1 if set_.include_constant else 0
    for n in range(1, set_.m + 1):
        omega = (2 * n - 1) * np.pi / (2.0 * set_.L)
        js = off + 2 * (n - 1)
        jc = js + 1
        D[jc, js] = omega
        D[js, jc] = -omega
    return D


def gram_matrix(set_, quad):
    """Matrix of L2 inner products (identity for the default families)."""
    B = basis_matrix(set_, quad.nodes)
    return (B * quad.weights) @ B.T


def project(samples, set_, quad):
    """L2 projection coefficients of a field sampled on the quadrature nodes.

    With the constant mode included the family is no longer orthonormal,
    so the small Gram system is solved instead of assuming orthonormality.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape != quad.nodes.shape:
        raise ValueError("samples must align with the quadrature nodes")
    B = basis_matrix(set_, quad.nodes)
    raw = B @ (quad.weights * samples)
    if set_.kind is BasisKind.PLANT_V and set_.include_constant:
        return np.linalg.solve(gram_matrix(set_, quad), raw)
    return raw


def synthesize(coeffs, set_, points):
    """Pointwise sum of coefficients times members, 0 outside [-L, L] for plant."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (set_.dim,):
        raise ValueError(f"expected {set_.dim} coefficients, got {coeffs.shape}")
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    vals = coeffs @ basis_matrix(set_, pts)
    return vals if np.ndim(points) else float(vals[0])
