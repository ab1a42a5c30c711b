"""Model parameters, initial data, the coefficient ODE system, and time stepping.

The four-field Galerkin system evolves coefficient vectors
(coef_u, coef_w, coef_v, coef_z) for plant biomass, water, and their
derivative trackers:

    coef_u' = -(d B_hat + mu I) coef_u + proj_plant(P1)
    coef_w' = -(G_hat + I) coef_w + proj_water(P2)
    coef_v' = -(mu + d Gamma) coef_v + d J_hat coef_u + proj_plant(Q1)
    coef_z' = -(M_hat + I) coef_z + proj_deriv(Q2)

Time integration is classical fixed-step RK4.  ``estimate_constants``
evaluates the closed-form constants of the a-priori energy estimates,
the smallness thresholds on the initial data, and the horizon shrink
rule that keeps the forced term below M/5 in the sup-norm budget.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .basis import (
    BasisKind,
    BasisSet,
    QuadratureRule,
    basis_matrix,
    default_rule,
    differentiation_matrix,
    project,
)
from .nonlinear import CutoffSpec, ReactionParams, P1, P2, Q1, Q2


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Positive model parameters: rainfall a, logistic b, dispersal rate,
    mortality mu, slope advection nu, half-length L, cutoff bound M."""

    a: float
    b: float
    dispersal: float
    mu: float
    nu: float
    L: float
    M: float

    def __post_init__(self):
        if self.a < 0 or self.b < 0 or self.nu < 0:
            raise ValueError("a, b and nu must be nonnegative")
        for name in ("dispersal", "mu", "L", "M"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def reaction(self):
        return ReactionParams(a=self.a, b=self.b, cutoff=CutoffSpec(self.M))


@dataclass
class GalerkinState:
    t: float
    coef_u: np.ndarray
    coef_w: np.ndarray
    coef_v: np.ndarray
    coef_z: np.ndarray

    def __post_init__(self):
        for name in ("coef_u", "coef_w", "coef_v", "coef_z"):
            arr = np.asarray(getattr(self, name), dtype=float)
            setattr(self, name, arr)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")

    def pack(self):
        return np.concatenate([self.coef_u, self.coef_w, self.coef_v, self.coef_z])


@dataclass(frozen=True)
class Discretization:
    """Bundle of the three bases, the shared quadrature rule, and caches."""

    plant: BasisSet
    water: BasisSet
    derivw: BasisSet
    quad: QuadratureRule

    @classmethod
    def create(cls, m, L, include_constant=False, panels=None, order=None):
        plant = BasisSet(BasisKind.PLANT_V, m, L, include_constant)
        water = BasisSet(BasisKind.WATER_DIRICHLET, m, L)
        derivw = BasisSet(BasisKind.DERIV_W, m, L)
        if panels is None and order is None:
            quad = default_rule(m, L)
        else:
            quad = QuadratureRule(panels=panels or 2 * m + 4, order=order or 10, L=L)
        return cls(plant, water, derivw, quad)

    @property
    def m(self):
        return self.water.m

    @property
    def L(self):
        return self.plant.L

    def _cache(self, name, builder):
        store = self.__dict__.setdefault("_cached", {})
        if name not in store:
            store[name] = builder()
        return store[name]

    @property
    def phi_nodes(self):
        return self._cache("phi", lambda: basis_matrix(self.plant, self.quad.nodes))

    @property
    def psi_nodes(self):
        return self._cache("psi", lambda: basis_matrix(self.water, self.quad.nodes))

    @property
    def rho_nodes(self):
        return self._cache("rho", lambda: basis_matrix(self.derivw, self.quad.nodes))

    @property
    def D_u(self):
        return self._cache("D_u", lambda: differentiation_matrix(self.plant))

    @property
    def D_w(self):
        return self._cache("D_w", lambda: differentiation_matrix(self.water))

    def unpack(self, t, y):
        du, m = self.plant.dim, self.m
        return GalerkinState(
            t=t,
            coef_u=y[:du],
            coef_w=y[du : du + m],
            coef_v=y[du + m : 2 * du + m],
            coef_z=y[2 * du + m :],
        )


# ---------------------------------------------------------------------------
# initial profiles


@dataclass(frozen=True)
class Profile:
    """Initial profile with an analytic derivative."""

    fn: callable
    dfn: callable

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))

    def derivative(self, x):
        return self.dfn(np.asarray(x, dtype=float))

    def scaled(self, s):
        return Profile(fn=lambda x: s * self.fn(x), dfn=lambda x: s * self.dfn(x))


def gaussian_bump(center, width, amplitude):
    if not width > 0:
        raise ValueError("bump width must be positive")
    c, w, A = float(center), float(width), float(amplitude)
    fn = lambda x: A * np.exp(-(((x - c) / w) ** 2))
    dfn = lambda x: A * np.exp(-(((x - c) / w) ** 2)) * (-2.0 * (x - c) / w**2)
    return Profile(fn, dfn)


def single_mode(basis, k, amplitude):
    """Amplitude times the k-th frequency member of a family.

    For the plant family this is the sine member s_k; for the water and
    derivative families the k-th member.
    """
    if not 1 <= k <= basis.m:
        raise ValueError("mode index out of range")
    L, A = basis.L, float(amplitude)
    if basis.kind is BasisKind.PLANT_V:
        omega = (2 * k - 1) * math.pi / (2.0 * L)
        # members of the volume-constrained space extend by zero
        fn = lambda x: np.where(np.abs(x) > L, 0.0, A * np.sin(omega * x) / math.sqrt(L))
        dfn = lambda x: np.where(np.abs(x) > L, 0.0, A * omega * np.cos(omega * x) / math.sqrt(L))
    elif basis.kind is BasisKind.WATER_DIRICHLET:
        omega = k * math.pi / (2.0 * L)
        fn = lambda x: A * np.sin(omega * (x + L)) / math.sqrt(L)
        dfn = lambda x: A * omega * np.cos(omega * (x + L)) / math.sqrt(L)
    else:
        omega = k * math.pi / (2.0 * L)
        fn = lambda x: A * np.cos(omega * (x + L)) / math.sqrt(L)
        dfn = lambda x: -A * omega * np.sin(omega * (x + L)) / math.sqrt(L)
    return Profile(fn, dfn)


def csv_profile(samples):
    """Cubic-spline profile through (x, value) samples; derivative from the spline."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 2 or samples.shape[0] < 4:
        raise ValueError("csv profile needs an (n, 2) array with n >= 4")
    order = np.argsort(samples[:, 0])
    spline = CubicSpline(samples[order, 0], samples[order, 1])
    dspline = spline.derivative()
    return Profile(fn=lambda x: spline(x), dfn=lambda x: dspline(x))


def zero_profile():
    return Profile(fn=lambda x: np.zeros_like(x), dfn=lambda x: np.zeros_like(x))


_BOUNDARY_TOL = 1e-8


def initial_state(u0, w0, disc, t0=0.0):
    """Project initial profiles onto the four coefficient vectors.

    coef_u, coef_w are projections of the profiles; coef_v, coef_z are
    projections of the profile derivatives onto the plant and derivative
    families.  Boundary constraints are enforced to 1e-8: u0 must vanish
    outside the interval (the volume constraint; a jump at the endpoints
    themselves is legitimate), w0 must vanish at the endpoints.
    """
    u0 = _as_profile(u0, disc)
    w0 = _as_profile(w0, disc)
    L = disc.L
    outside = L * np.array([-2.0, -1.5, -1.1, -1.02, 1.02, 1.1, 1.5, 2.0])
    if np.abs(u0(outside)).max() > _BOUNDARY_TOL:
        raise ValueError("u0 violates the zero volume constraint outside the interval")
    if np.abs(w0(np.array([-L, L]))).max() > _BOUNDARY_TOL:
        raise ValueError("w0 violates the Dirichlet boundary condition")
    nodes, quad = disc.quad.nodes, disc.quad
    return GalerkinState(
        t=t0,
        coef_u=project(u0(nodes), disc.plant, quad),
        coef_w=project(w0(nodes), disc.water, quad),
        coef_v=project(u0.derivative(nodes), disc.plant, quad),
        coef_z=project(w0.derivative(nodes), disc.derivw, quad),
    )


def _as_profile(p, disc):
    if isinstance(p, Profile):
        return p
    if callable(p):
        return Profile(fn=p, dfn=_fd_derivative(p, disc.L))
    raise TypeError("initial data must be a Profile or a callable")


def _fd_derivative(fn, L, order_h=1e-6):
    # 4th-order central differences; h scaled to the domain
    h = L * order_h

    def dfn(x):
        x = np.asarray(x, dtype=float)
        return (-fn(x + 2 * h) + 8 * fn(x + h) - 8 * fn(x - h) + fn(x - 2 * h)) / (12 * h)

    return dfn


# ---------------------------------------------------------------------------
# right-hand side and integration


def rhs(state, ops, params, disc):
    """Coefficient time-derivatives of the four-field system."""
    quad = disc.quad
    w_q = quad.weights
    u = state.coef_u @ disc.phi_nodes
    w = state.coef_w @ disc.psi_nodes
    v = state.coef_v @ disc.phi_nodes
    z = state.coef_z @ disc.rho_nodes
    rp = params.reaction
    p1 = np.broadcast_to(np.asarray(P1(u, w, rp), dtype=float), u.shape)
    p2 = np.broadcast_to(np.asarray(P2(u, w, rp), dtype=float), u.shape)
    q1 = np.broadcast_to(np.asarray(Q1(u, w, v, z, rp), dtype=float), u.shape)
    q2 = np.broadcast_to(np.asarray(Q2(u, w, v, z, rp), dtype=float), u.shape)
    p1_hat = disc.phi_nodes @ (w_q * p1)
    p2_hat = disc.psi_nodes @ (w_q * p2)
    q1_hat = disc.phi_nodes @ (w_q * q1)
    q2_hat = disc.rho_nodes @ (w_q * q2)

    d = params.dispersal
    if ops.mass_u is None:
        du = -(d * (ops.B_hat @ state.coef_u)) - params.mu * state.coef_u + p1_hat
        dv = (
            -(params.mu + d * ops.gamma_mass) * state.coef_v
            + d * (ops.J_hat @ state.coef_u)
            + q1_hat
        )
    else:
        # non-orthonormal plant dictionary: mass matrix on the left
        du = np.linalg.solve(
            ops.mass_u, -(d * (ops.B_hat @ state.coef_u)) + p1_hat
        ) - params.mu * state.coef_u
        dv = -(params.mu + d * ops.gamma_mass) * state.coef_v + np.linalg.solve(
            ops.mass_u, d * (ops.J_hat @ state.coef_u) + q1_hat
        )
    dw = -(ops.G_hat @ state.coef_w) - state.coef_w + p2_hat
    dz = -(ops.M_hat @ state.coef_z) - state.coef_z + q2_hat
    out = np.concatenate([du, dw, dv, dz])
    if not np.all(np.isfinite(out)):
        raise IntegrationError(f"non-finite time derivative at t = {state.t}")
    return out


def default_dt(params, ops):
    """Stability-informed step: dt = min(1e-3, 0.5 / rho)."""
    sym = 0.5 * (ops.G_hat + ops.G_hat.T)
    lam = float(np.linalg.eigvalsh(sym)[-1])
    rho = lam + 1.0 + params.mu + 2.0 * ops.gamma_mass * params.dispersal
    return min(1e-3, 0.5 / rho)


@dataclass
class Trajectory:
    times: list
    states: list
    dt: float
    aborted: str | None = None

    @property
    def final(self):
        return self.states[-1]

    def __iter__(self):
        return iter(self.states)

    def __len__(self):
        return len(self.states)


_BLOWUP_LIMIT = 1e12


def integrate(state0, params, ops, disc, T, dt=None, record_stride=1, monitors=()):
    """Classical RK4 on the joint coefficient system up to time T.

    The step is shrunk (never grown) so that an integer number of steps
    lands exactly on T.  States are recorded at t = 0, every
    ``record_stride``-th step, and at the final time.  Monitors are
    called with each newly computed state.  Integration aborts (keeping
    the last valid state and setting ``aborted``) if any coefficient
    exceeds 1e12 in modulus or turns non-finite.
    """
    if not T > 0:
        raise ValueError("final time T must be positive")
    if dt is None:
        dt = default_dt(params, ops)
    if not 0 < dt:
        raise ValueError("dt must be positive")
    n_steps = max(1, math.ceil(T / dt - 1e-12))
    h = T / n_steps
    y = state0.pack()
    t = float(state0.t)
    times, states = [t], [disc.unpack(t, y.copy())]
    aborted = None

    def f(tt, yy):
        return rhs(disc.unpack(tt, yy), ops, params, disc)

    for k in range(1, n_steps + 1):
        try:
            k1 = f(t, y)
            k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = f(t + h, y + h * k3)
        except IntegrationError as err:
            aborted = str(err)
            break
        y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t_new = state0.t + k * h
        if not np.all(np.isfinite(y_new)):
            aborted = f"non-finite state at t = {t_new}"
            break
        if np.abs(y_new).max() > _BLOWUP_LIMIT:
            aborted = f"blow-up (|coef| > {_BLOWUP_LIMIT:g}) at t = {t_new}"
            break
        y, t = y_new, t_new
        state = disc.unpack(t, y.copy())
        for mon in monitors:
            mon(state)
        if k % record_stride == 0 or k == n_steps:
            times.append(t)
            states.append(state)
    return Trajectory(times=times, states=states, dt=h, aborted=aborted)


# ---------------------------------------------------------------------------
# closed-form estimate constants


@dataclass(frozen=True)
class EstimateConstants:
    """Every constant of the a-priori energy estimates, evaluated for one run.

    kappa/chi (and primed versions) are the coercivity constants of the
    water form fixed by the Cauchy-Young split; C_emb is the sup-norm
    embedding constant sqrt(1 + 1/(2L)); script_C1/script_C2 are the
    smallness thresholds on the initial L2 and derivative norms;
    T_admissible is the largest horizon <= T with
    C_emb * a * e^(chi T) * sqrt(2 |Omega| T) <= M/5.
    """

    C1: float
    C2: float
    D1: float
    D2: float
    D1_tilde: float
    D2_tilde: float
    E1: float
    E2: float
    E3: float
    F1: float
    F2: float
    F3: float
    script_C1: float
    script_C2: float
    kappa: float
    chi: float
    kappa_p: float
    chi_p: float
    C_emb: float
    T: float
    T_admissible: float
    small_data_ok: bool

    def as_dict(self):
        out = {}
        for name in self.__dataclass_fields__:
            val = getattr(self, name)
            out[name] = bool(val) if name == "small_data_ok" else float(val)
        return out


def _forced_sup_term(params, T, C_emb):
    chi = 0.5 * (1.0 + params.nu**2)
    return C_emb * params.a * math.exp(chi * T) * math.sqrt(2.0 * (2.0 * params.L) * T)


def admissible_horizon(params, T_max):
    """Largest T <= T_max keeping the forced sup-norm term below M/5."""
    C_emb = math.sqrt(1.0 + 1.0 / (2.0 * params.L))
    target = params.M / 5.0
    if params.a == 0 or _forced_sup_term(params, T_max, C_emb) <= target:
        return T_max
    lo, hi = 0.0, T_max
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _forced_sup_term(params, mid, C_emb) <= target:
            lo = mid
        else:
            hi = mid
    return lo


def estimate_constants(params, T, ic_norms, ops):
    """Evaluate the closed-form constants of the energy estimates.

    ``ic_norms`` maps 'u0', 'w0', 'du0', 'dw0' to the L2 norms of the
    initial data and its derivatives.  The operator-norm surrogates are
    2 * Gamma for the plant form bound and the L1 norm of gamma' for the
    companion operator.
    """
    a, b, d, mu, nu, L, M = (
        params.a,
        params.b,
        params.dispersal,
        params.mu,
        params.nu,
        params.L,
        params.M,
    )
    n_u0 = float(ic_norms["u0"])
    n_w0 = float(ic_norms["w0"])
    n_du0 = float(ic_norms["du0"])
    n_dw0 = float(ic_norms["dw0"])
    omega_len = 2.0 * L
    kappa = kappa_p = 0.5
    chi = chi_p = 0.5 * (1.0 + nu**2)
    C_emb = math.sqrt(1.0 + 1.0 / omega_len)
    J_op = ops.J_norm_bound
    B_bound = ops.K_norm_bound  # 2 * Gamma
    G_bound = 1.0 + nu

    grow = M**2 + b * M**3
    C1 = math.sqrt(2.0) * max(math.exp(0.5 * grow * T), math.exp(chi * T))
    C2 = a * math.exp(chi * T) * math.sqrt(2.0 * omega_len * T)
    D1_tilde = (
        2.0 * max(2.0 * M + 3.0 * b * M**3, 0.5 * grow)
        + 2.0 * max(M**2, 3.0 * b * M**3)
        + max(0.5 * d * J_op, chi_p)
    )
    D2_tilde = 0.5 * d * J_op * math.exp(2.0 * grow * T) * n_u0**2
    D1 = math.sqrt(2.0) * math.exp(D1_tilde * T)
    D2 = 2.0 * math.exp(D1_tilde * T) * math.sqrt(D2_tilde * T)
    E1 = 2.0 * max(C1, D1 * math.exp(grow * T) * math.sqrt(d * J_op))
    E2 = D1
    E3 = C2
    F1 = math.sqrt(T) * (E1 * (n_u0 + n_w0) + E2 * (n_du0 + n_dw0))
    F2 = (
        math.sqrt(T)
        * math.exp(grow * T)
        * (0.25 * M**2 + 0.125 * b * M**3 + mu + B_bound * d)
        * n_u0
    )
    F3 = math.sqrt(T) * (0.25 * a * M**2 * math.sqrt(omega_len) + G_bound + 1.0) * F1
    script_C1 = M / (2.0 * C_emb * E1)
    script_C2 = M / (2.0 * C_emb * E2)
    ok = (n_u0 + n_w0 < script_C1) and (n_du0 + n_dw0 < script_C2)
    return EstimateConstants(
        C1=C1,
        C2=C2,
        D1=D1,
        D2=D2,
        D1_tilde=D1_tilde,
        D2_tilde=D2_tilde,
        E1=E1,
        E2=E2,
        E3=E3,
        F1=F1,
        F2=F2,
        F3=F3,
        script_C1=script_C1,
        script_C2=script_C2,
        kappa=kappa,
        chi=chi,
        kappa_p=kappa_p,
        chi_p=chi_p,
        C_emb=C_emb,
        T=T,
        T_admissible=admissible_horizon(params, T),
        small_data_ok=ok,
    )


def state_norms_for_constants(state, disc):
    """L2 norms (Parseval) of a state, keyed as estimate_constants expects."""
    from .monitor import norms  # local import to avoid a cycle

    n = norms(state, disc)
    return {"u0": n["l2_u"], "w0": n["l2_w"], "du0": n["l2_v"], "dw0": n["l2_z"]}


def admissible_scale(ic_norms, constants, fraction=0.9):
    """Scale factor putting initial data strictly inside the smallness thresholds."""
    s0 = ic_norms["u0"] + ic_norms["w0"]
    s1 = ic_norms["du0"] + ic_norms["dw0"]
    if s0 == 0 and s1 == 0:
        return 1.0
    bounds = []
    if s0 > 0:
        bounds.append(constants.script_C1 / s0)
    if s1 > 0:
        bounds.append(constants.script_C2 / s1)
    return fraction * min(bounds)
