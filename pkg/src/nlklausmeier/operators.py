"""Nonlocal operators and Galerkin matrix assembly.

The dispersal operator and its derivative companion act on fields that
vanish outside the interval:

    (K u)(x) = int gamma(x - y) u(y) dy  -  Gamma u(x)
    (J u)(x) = int gamma'(x - y) u(y) dy

with both integrals reducing to the interval because u does.  Assembly
evaluates the inner convolution integral with Gauss panels split at
y = x, which restores spectral accuracy for kernels with a kink at the
origin (the Laplace family).
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .basis import BasisKind, basis_matrix, gram_matrix
from .kernels import eval_gamma, eval_gamma_dz, gamma_mass, kernel_report


def _split_blocks(x, L, panels_side, order):
    """Per-point inner rules for integrals over [-L, L] split at each x.

    Returns (Y, V) with shape (len(x), 2 * panels_side * order): Gauss
    nodes and weights covering [-L, x[i]] and [x[i], L] row by row.
    """
    x = np.asarray(x, dtype=float)
    xg, wg = leggauss(order)
    blocks_y, blocks_v = [], []
    for lo, hi in ((np.full_like(x, -L), x), (x, np.full_like(x, L))):
        frac = np.linspace(0.0, 1.0, panels_side + 1)
        edges = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
        mids = 0.5 * (edges[:, :-1] + edges[:, 1:])
        halves = 0.5 * np.diff(edges, axis=1)
        blocks_y.append((mids[:, :, None] + halves[:, :, None] * xg).reshape(len(x), -1))
        blocks_v.append((halves[:, :, None] * wg).reshape(len(x), -1))
    return np.hstack(blocks_y), np.hstack(blocks_v)


def _inner_panels(quad):
    return max(4, (quad.panels + 1) // 2)


def _convolve(kernel_values, field, x, quad, L):
    """int_{-L}^{L} kernel(x - y) field(y) dy at each point of x.

    ``field`` may be a callable (evaluated on split Gauss panels, the
    accurate path for kink kernels) or samples on ``quad.nodes`` (summed
    with the global rule; adequate only for smooth kernels).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if callable(field):
        Y, V = _split_blocks(x, L, _inner_panels(quad), quad.order)
        K = kernel_values(x[:, None] - Y)
        return np.sum(K * V * field(Y.ravel()).reshape(Y.shape), axis=1)
    samples = np.asarray(field, dtype=float)
    if samples.shape != quad.nodes.shape:
        raise ValueError("field samples must align with the quadrature nodes")
    K = kernel_values(x[:, None] - quad.nodes[None, :])
    return K @ (quad.weights * samples)


def apply_K(spec, field, quad, x):
    """Dispersal operator applied to a zero-extended field, evaluated at x.

    Serves as the direct-quadrature oracle for the assembled matrix path.
    ``field`` callable or samples on quad nodes (callable required for
    off-node x).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    conv = _convolve(lambda z: eval_gamma(spec, z), field, x, quad, quad.L)
    if callable(field):
        u_x = field(x)
    else:
        u_x = _values_at_nodes(field, quad, x)
    return conv - gamma_mass(spec) * u_x


def apply_J(spec, field, quad, x):
    """Derivative-companion operator; gamma' integrates to zero so no mass term."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return _convolve(lambda z: eval_gamma_dz(spec, z), field, x, quad, quad.L)


def _values_at_nodes(samples, quad, x):
    samples = np.asarray(samples, dtype=float)
    idx = np.searchsorted(quad.nodes, x)
    idx = np.clip(idx, 0, len(quad.nodes) - 1)
    left = np.clip(idx - 1, 0, len(quad.nodes) - 1)
    pick = np.where(np.abs(quad.nodes[left] - x) < np.abs(quad.nodes[idx] - x), left, idx)
    if np.any(np.abs(quad.nodes[pick] - x) > 1e-12):
        raise ValueError("sample-based application requires x on the quadrature nodes")
    return samples[pick]


def _conv_columns(spec, basis, quad, kernel_values):
    """Matrix of (kernel * phi_j, phi_k) entries over the basis."""
    PHI = basis_matrix(basis, quad.nodes)
    Y, V = _split_blocks(quad.nodes, quad.L, _inner_panels(quad), quad.order)
    KV = kernel_values(quad.nodes[:, None] - Y) * V
    PHIY = basis_matrix(basis, Y.ravel())
    conv = np.empty((len(quad.nodes), basis.dim))
    for j in range(basis.dim):
        conv[:, j] = np.sum(KV * PHIY[j].reshape(Y.shape), axis=1)
    return (PHI * quad.weights) @ conv


def assemble_B(spec, basis, quad):
    """Galerkin matrix of the plant bilinear form, B_hat[k, j] = B[phi_j, phi_k].

    Uses the inner-product identity B[u, phi] = -(K u, phi):
    B_hat = Gamma * Gram - (gamma * phi_j, phi_k).
    """
    if basis.kind is not BasisKind.PLANT_V:
        raise ValueError("B acts on the plant family")
    C = _conv_columns(spec, basis, quad, lambda z: eval_gamma(spec, z))
    return gamma_mass(spec) * gram_matrix(basis, quad) - C


def assemble_J(spec, basis, quad):
    """Galerkin matrix of the derivative companion, J_hat[k, j] = (J phi_j, phi_k)."""
    if basis.kind is not BasisKind.PLANT_V:
        raise ValueError("J acts on the plant family")
    return _conv_columns(spec, basis, quad, lambda z: eval_gamma_dz(spec, z))


def _cross_sin_cos(m):
    """(rho_j, psi_k) inner products: (2/pi) k (1 - (-1)^(j+k)) / (k^2 - j^2)."""
    j = np.arange(1, m + 1)[None, :]
    k = np.arange(1, m + 1)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = (2.0 / math.pi) * k * (1.0 - (-1.0) ** (j + k)) / (k**2 - j**2)
    return np.where(j == k, 0.0, vals)


def assemble_G(basis, nu):
    """Water-form matrix G_hat[k, j] = (psi_j', psi_k') - nu (psi_j', psi_k), closed form.

    Diffusion part diag((k pi / 2L)^2); advection part antisymmetric
    (Dirichlet endpoints kill the boundary term), nonzero only for
    j + k odd.
    """
    if basis.kind is not BasisKind.WATER_DIRICHLET:
        raise ValueError("G_hat is assembled on the water family")
    m, L = basis.m, basis.L
    omegas = np.arange(1, m + 1) * math.pi / (2.0 * L)
    adv = omegas[None, :] * _cross_sin_cos(m)  # (psi_j', psi_k)
    return np.diag(omegas**2) - nu * adv


def assemble_M(basis, nu):
    """Same bilinear form on the derivative family, M_hat[k, j] = G[rho_j, rho_k].

    Cosines do not vanish at the endpoints, so the advection part picks
    up boundary contributions and is no longer antisymmetric; entries are
    still closed-form.
    """
    if basis.kind is not BasisKind.DERIV_W:
        raise ValueError("M_hat is assembled on the derivative family")
    m, L = basis.m, basis.L
    omegas = np.arange(1, m + 1) * math.pi / (2.0 * L)
    # (rho_j', rho_k) = -omega_j (psi_j, rho_k) = -omega_j cross[j, k]
    adv = -(omegas[None, :] * _cross_sin_cos(m).T)
    return np.diag(omegas**2) - nu * adv


def coercivity_theta(B_hat, sym_tol=1e-10):
    """Smallest eigenvalue of the (symmetric) plant matrix.

    This is the discrete coercivity constant: B[u, u] >= theta ||u||^2
    on the span.
    """
    B_hat = np.asarray(B_hat, dtype=float)
    scale = max(1.0, np.abs(B_hat).max())
    if np.abs(B_hat - B_hat.T).max() > sym_tol * scale:
        raise ValueError("coercivity requires a symmetric matrix")
    return float(np.linalg.eigvalsh(0.5 * (B_hat + B_hat.T))[0])


class SymmetricFormEvaluator:
    """Direct quadrature of the symmetric double-integral dispersal form.

    Independent of the assembled-matrix path (no use of the inner-product
    identity): evaluates
        1/2 iint_{Omega^2} (f(y) - f(x)) gamma(x - y) (g(y) - g(x)) dy dx
      + int_Omega f g (Gamma - int_Omega gamma(x - y) dy) dx,
    the second term collecting the exterior contribution of zero-extended
    fields.  Fixing ``f`` up front shares the kernel tensor across many
    test functions g.
    """

    def __init__(self, spec, f, quad, panels_side=None):
        L = quad.L
        self.x = quad.nodes
        self.wx = quad.weights
        self.Y, V = _split_blocks(self.x, L, panels_side or _inner_panels(quad), quad.order)
        self.KV = eval_gamma(spec, self.x[:, None] - self.Y) * V
        self.fx = f(self.x)
        self.fY = f(self.Y.ravel()).reshape(self.Y.shape)
        self.tail_mass = gamma_mass(spec) - np.sum(self.KV, axis=1)

    def against(self, g):
        gx = g(self.x)
        gY = g(self.Y.ravel()).reshape(self.Y.shape)
        core = 0.5 * np.sum(
            self.wx
            * np.sum(self.KV * (self.fY - self.fx[:, None]) * (gY - gx[:, None]), axis=1)
        )
        tail = np.sum(self.wx * self.fx * gx * self.tail_mass)
        return float(core + tail)


def bilinear_form_B(spec, f, g, quad, panels_side=None):
    """One-shot direct quadrature of the symmetric dispersal form B[f, g]."""
    return SymmetricFormEvaluator(spec, f, quad, panels_side).against(g)


@dataclass(frozen=True)
class AssembledOperators:
    """All Galerkin matrices plus the scalar bounds the estimates need."""

    B_hat: np.ndarray
    J_hat: np.ndarray
    G_hat: np.ndarray
    M_hat: np.ndarray
    theta: float
    K_norm_bound: float
    J_norm_bound: float
    gamma_mass: float
    kernel: object = None
    mass_u: np.ndarray | None = None

    def scalar_report(self):
        return {
            "theta": self.theta,
            "K_norm_bound": self.K_norm_bound,
            "J_norm_bound": self.J_norm_bound,
            "Gamma": self.gamma_mass,
        }


def assemble_operators(spec, plant, water, derivw, quad, nu, require_hypothesis=True):
    """Assemble every matrix and scalar bound for one discretisation.

    ``require_hypothesis`` rejects kernels failing the admissibility
    checks; pass False to experiment with e.g. compactly supported
    tabulated kernels.
    """
    report = kernel_report(spec)
    if require_hypothesis and not report.hypothesis_satisfied:
        raise ValueError(
            "kernel fails admissibility checks: " + "; ".join(report.reasons or ("unknown",))
        )
    B_hat = assemble_B(spec, plant, quad)
    B_hat = 0.5 * (B_hat + B_hat.T)  # symmetric up to quadrature noise; enforce exactly
    J_hat = assemble_J(spec, plant, quad)
    G_hat = assemble_G(water, nu)
    M_hat = assemble_M(derivw, nu)
    mass = None
    if plant.include_constant:
        mass = gram_matrix(plant, quad)
    return AssembledOperators(
        B_hat=B_hat,
        J_hat=J_hat,
        G_hat=G_hat,
        M_hat=M_hat,
        theta=coercivity_theta(B_hat),
        K_norm_bound=2.0 * report.gamma_mass,
        J_norm_bound=report.l1_gamma_prime,
        gamma_mass=report.gamma_mass,
        kernel=spec,
        mass_u=mass,
    )
