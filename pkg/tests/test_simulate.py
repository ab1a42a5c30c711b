import math

import numpy as np
import pytest

from nlklausmeier import (
    Discretization,
    KernelSpec,
    ModelParams,
    admissible_horizon,
    admissible_scale,
    assemble_operators,
    default_dt,
    estimate_constants,
    gaussian_bump,
    initial_state,
    integrate,
    rhs,
    single_mode,
    zero_profile,
)
from nlklausmeier.simulate import Profile, state_norms_for_constants


def make_params(**kw):
    base = dict(a=0.5, b=1.0, dispersal=1.0, mu=1.0, nu=1.0, L=1.0, M=2.0)
    base.update(kw)
    return ModelParams(**base)


@pytest.fixture
def ops8(laplace_half, disc8):
    return assemble_operators(
        laplace_half, disc8.plant, disc8.water, disc8.derivw, disc8.quad, nu=1.0
    )


@pytest.fixture
def ops8_nu0(laplace_half, disc8):
    return assemble_operators(
        laplace_half, disc8.plant, disc8.water, disc8.derivw, disc8.quad, nu=0.0
    )


class TestModelParams:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            make_params(mu=0.0)
        with pytest.raises(ValueError):
            make_params(dispersal=-1.0)
        with pytest.raises(ValueError):
            make_params(a=-0.1)


class TestInitialState:
    def test_single_sine_mode(self, disc8):
        state = initial_state(single_mode(disc8.plant, 1, 1.0), zero_profile(), disc8)
        expected_u = np.zeros(disc8.plant.dim)
        expected_u[0] = 1.0
        assert np.abs(state.coef_u - expected_u).max() <= 1e-12
        expected_v = np.zeros(disc8.plant.dim)
        expected_v[1] = math.pi / 2.0  # derivative lands on c1
        assert np.abs(state.coef_v - expected_v).max() <= 1e-12

    def test_zero_profiles(self, disc8):
        state = initial_state(zero_profile(), zero_profile(), disc8)
        assert np.abs(state.pack()).max() == 0.0

    def test_in_span_derivative_consistency(self, disc8, rng):
        # for data inside the span, coef_v equals D coef_u to quadrature precision
        c = rng.standard_normal(disc8.plant.dim)
        from nlklausmeier.basis import synthesize

        prof = Profile(
            fn=lambda x: np.where(
                np.abs(x) > 1.0, 0.0, synthesize(c, disc8.plant, x)
            ),
            dfn=lambda x: np.where(
                np.abs(x) > 1.0, 0.0, synthesize(disc8.D_u @ c, disc8.plant, x)
            ),
        )
        state = initial_state(prof, zero_profile(), disc8)
        assert np.abs(state.coef_v - disc8.D_u @ state.coef_u).max() <= 1e-10

    def test_rejects_mass_outside_interval(self, disc8):
        wide = gaussian_bump(0.0, 1.5, 1.0)  # visibly nonzero past the endpoints
        with pytest.raises(ValueError, match="volume constraint"):
            initial_state(wide, zero_profile(), disc8)

    def test_rejects_water_boundary_violation(self, disc8):
        bad = gaussian_bump(0.6, 0.4, 1.0)  # ~0.37 at x = 1
        with pytest.raises(ValueError, match="Dirichlet"):
            initial_state(zero_profile(), bad, disc8)

    def test_plain_callable_gets_fd_derivative(self, disc8):
        bump = gaussian_bump(0.0, 0.2, 1.0)
        state_fd = initial_state(lambda x: bump(x), zero_profile(), disc8)
        state_exact = initial_state(bump, zero_profile(), disc8)
        assert np.abs(state_fd.coef_v - state_exact.coef_v).max() <= 1e-7


class TestRhs:
    def test_zero_state_rainfall_forcing(self, disc8, ops8):
        params = make_params(a=2.0)
        state = initial_state(zero_profile(), zero_profile(), disc8)
        deriv = rhs(state, ops8, params, disc8)
        dim_u, m = disc8.plant.dim, disc8.m
        du, dw = deriv[:dim_u], deriv[dim_u : dim_u + m]
        dv, dz = deriv[dim_u + m : 2 * dim_u + m], deriv[2 * dim_u + m :]
        assert np.abs(du).max() == 0.0
        assert np.abs(dv).max() == 0.0
        assert np.abs(dz).max() == 0.0
        for k in range(1, m + 1):
            expected = 2.0 * 4.0 / (k * math.pi) if k % 2 == 1 else 0.0
            assert dw[k - 1] == pytest.approx(expected, abs=1e-12)

    def test_single_water_mode_decay_rate(self, disc8, ops8_nu0):
        params = make_params(a=0.0, nu=0.0)
        k = 2
        state = initial_state(zero_profile(), single_mode(disc8.water, k, 1.0), disc8)
        deriv = rhs(state, ops8_nu0, params, disc8)
        dim_u = disc8.plant.dim
        dw = deriv[dim_u : dim_u + disc8.m]
        lam = (k * math.pi / 2.0) ** 2 + 1.0
        expected = np.zeros(disc8.m)
        expected[k - 1] = -lam
        assert np.abs(dw - expected).max() <= 1e-10

    def test_derivative_compatibility_exact_regime(self, disc8, ops8, rng):
        # odd plant data with w = z = 0: the v-equation is the exact
        # derivative of the u-equation at the coefficient level
        params = make_params()
        c = np.zeros(disc8.plant.dim)
        c[0::2] = rng.standard_normal(disc8.m)  # sine slots only
        state = initial_state(zero_profile(), zero_profile(), disc8)
        state.coef_u = c
        state.coef_v = disc8.D_u @ c
        deriv = rhs(state, ops8, params, disc8)
        dim_u, m = disc8.plant.dim, disc8.m
        du = deriv[:dim_u]
        dv = deriv[dim_u + m : 2 * dim_u + m]
        assert np.abs(dv - disc8.D_u @ du).max() <= 1e-10

    def test_compatibility_defect_scales_linearly(self, disc8, ops8, rng):
        # even plant components activate the finite-truncation boundary
        # defect; the induced compatibility residual is linear in the
        # data scale, which is what makes the small-data regime clean
        params = make_params()
        c = rng.standard_normal(disc8.plant.dim)
        res = []
        for scale in (1e-3, 1e-6):
            state = initial_state(zero_profile(), zero_profile(), disc8)
            state.coef_u = scale * c
            state.coef_v = disc8.D_u @ (scale * c)
            deriv = rhs(state, ops8, params, disc8)
            dim_u, m = disc8.plant.dim, disc8.m
            du = deriv[:dim_u]
            dv = deriv[dim_u + m : 2 * dim_u + m]
            res.append(np.abs(dv - disc8.D_u @ du).max())
        assert res[0] == pytest.approx(1e3 * res[1], rel=1e-3)


class TestIntegrate:
    def test_exact_linear_decay(self, disc8, ops8_nu0):
        params = make_params(a=0.0, nu=0.0)
        k, T = 1, 0.1
        state0 = initial_state(zero_profile(), single_mode(disc8.water, k, 1.0), disc8)
        traj = integrate(state0, params, ops8_nu0, disc8, T=T, dt=1e-4, record_stride=10)
        lam = (k * math.pi / 2.0) ** 2 + 1.0
        assert traj.final.coef_w[k - 1] == pytest.approx(math.exp(-lam * T), rel=1e-6)
        assert np.abs(np.delete(traj.final.coef_w, k - 1)).max() <= 1e-14

    def test_bare_soil_stays_bare(self, disc8, ops8):
        # u = v = 0 is invariant: rainfall alone cannot create biomass
        params = make_params(a=1.5)
        state0 = initial_state(zero_profile(), zero_profile(), disc8)
        traj = integrate(state0, params, ops8, disc8, T=0.05, dt=1e-3)
        assert np.abs(traj.final.coef_u).max() == 0.0
        assert np.abs(traj.final.coef_v).max() == 0.0
        assert np.abs(traj.final.coef_w).max() > 1e-3  # water responded

    def test_rk4_step_halving(self, disc8, ops8):
        params = make_params()
        u0 = gaussian_bump(0.0, 0.23, 0.3)
        w0 = gaussian_bump(0.0, 0.22, 0.3)
        state0 = initial_state(u0, w0, disc8)
        T = 0.04
        ref = integrate(state0, params, ops8, disc8, T=T, dt=T / 128).final.pack()
        e1 = np.linalg.norm(integrate(state0, params, ops8, disc8, T=T, dt=T / 8).final.pack() - ref)
        e2 = np.linalg.norm(integrate(state0, params, ops8, disc8, T=T, dt=T / 16).final.pack() - ref)
        assert 11.0 <= e1 / e2 <= 22.0  # fourth order: ratio near 16

    def test_blowup_aborts_with_last_valid_state(self, disc8, ops8):
        # a destabilising step size drives the stiff water modes unstable
        params = make_params(a=0.0, nu=0.0)
        state0 = initial_state(zero_profile(), single_mode(disc8.water, 8, 1.0), disc8)
        traj = integrate(state0, params, ops8, disc8, T=50.0, dt=0.5)
        assert traj.aborted is not None
        assert np.isfinite(traj.final.pack()).all()

    def test_records_align_with_stride(self, disc8, ops8):
        params = make_params()
        state0 = initial_state(zero_profile(), zero_profile(), disc8)
        traj = integrate(state0, params, ops8, disc8, T=0.01, dt=1e-3, record_stride=4)
        assert traj.times[0] == 0.0
        assert traj.times[-1] == pytest.approx(0.01)
        assert len(traj.times) == 1 + math.ceil(10 / 4)

    def test_monitor_called_every_step(self, disc8, ops8):
        params = make_params()
        seen = []
        state0 = initial_state(zero_profile(), zero_profile(), disc8)
        integrate(
            state0, params, ops8, disc8, T=0.01, dt=1e-3, monitors=[lambda s: seen.append(s.t)]
        )
        assert len(seen) == 10

    def test_default_dt_rule(self, ops8):
        params = make_params()
        dt = default_dt(params, ops8)
        sym = 0.5 * (ops8.G_hat + ops8.G_hat.T)
        rho = np.linalg.eigvalsh(sym)[-1] + 1.0 + params.mu + 2.0 * params.dispersal
        assert dt == pytest.approx(min(1e-3, 0.5 / rho))


class TestEstimateConstants:
    def ic(self, u0=0.1, w0=0.0, du0=0.0, dw0=0.0):
        return {"u0": u0, "w0": w0, "du0": du0, "dw0": dw0}

    def test_short_horizon_limits(self, ops8):
        params = make_params()
        c = estimate_constants(params, 1e-12, self.ic(), ops8)
        assert c.C1 == pytest.approx(math.sqrt(2.0), rel=1e-9)
        assert c.C2 == pytest.approx(0.0, abs=1e-5)
        assert c.D2 == pytest.approx(0.0, abs=1e-5)

    def test_no_rain_kills_forcing_constants(self, ops8):
        params = make_params(a=0.0)
        c = estimate_constants(params, 0.1, self.ic(), ops8)
        assert c.C2 == 0.0
        assert c.E3 == 0.0

    def test_frozen_example(self, ops8):
        # M=2, b=1, nu=1, T=0.05: C1 = sqrt(2) max(e^{0.3}, e^{0.05})
        params = make_params(a=0.5, b=1.0, nu=1.0, M=2.0)
        c = estimate_constants(params, 0.05, self.ic(u0=0.1), ops8)
        assert c.C1 == pytest.approx(math.sqrt(2.0) * math.exp(0.3), rel=1e-12)
        assert c.chi == pytest.approx(1.0)
        assert c.C2 == pytest.approx(0.5 * math.exp(0.05) * math.sqrt(2 * 2 * 0.05), rel=1e-12)
        # D1_tilde = 2 max(2M + 3bM^3, (M^2+bM^3)/2) + 2 max(M^2, 3bM^3) + max(d |J| / 2, chi')
        expected_d1t = 2 * max(2 * 2 + 3 * 8, 0.5 * 12) + 2 * max(4.0, 24.0) + max(1.0, 1.0)
        assert c.D1_tilde == pytest.approx(expected_d1t)
        assert c.E2 == c.D1
        assert c.E3 == c.C2
        assert c.script_C1 == pytest.approx(2.0 / (2.0 * c.C_emb * c.E1), rel=1e-12)

    def test_embedding_constant(self, ops8):
        params = make_params(L=1.0)
        c = estimate_constants(params, 0.05, self.ic(), ops8)
        assert c.C_emb == pytest.approx(math.sqrt(1.5))

    def test_monotone_in_horizon(self, ops8):
        params = make_params()
        lo = estimate_constants(params, 0.05, self.ic(), ops8)
        hi = estimate_constants(params, 0.10, self.ic(), ops8)
        for name in ("C1", "C2", "D1", "D2", "E1", "E2", "E3", "F2"):
            assert getattr(hi, name) >= getattr(lo, name)
        assert all(getattr(lo, n) > 0 for n in ("C1", "D1", "E1", "E2", "C_emb"))

    def test_admissible_horizon_satisfies_rule(self, ops8):
        params = make_params()
        T = admissible_horizon(params, 1.0)
        forced = (
            math.sqrt(1.5) * params.a * math.exp(1.0 * T) * math.sqrt(2 * 2 * T)
        )
        assert forced <= params.M / 5.0 + 1e-12
        assert T < 1.0
        assert admissible_horizon(make_params(a=0.0), 1.0) == 1.0

    def test_admissibility_flag(self, disc8, ops8):
        params = make_params()
        T = admissible_horizon(params, 1.0)
        u0 = gaussian_bump(0.0, 0.22, 1.0)
        w0 = gaussian_bump(0.05, 0.2, 1.0)
        state = initial_state(u0, w0, disc8)
        ic = state_norms_for_constants(state, disc8)
        c = estimate_constants(params, T, ic, ops8)
        assert not c.small_data_ok  # amplitude 1 is far beyond the thresholds
        s = admissible_scale(ic, c, fraction=0.9)
        state2 = initial_state(u0.scaled(s), w0.scaled(s), disc8)
        ic2 = state_norms_for_constants(state2, disc8)
        c2 = estimate_constants(params, T, ic2, ops8)
        assert c2.small_data_ok


class TestDerivativeIdentityPreservation:
    def test_linear_invariant_regime(self, disc8, ops8_nu0, rng):
        # odd plant data, no water: machine-level preservation over [0, 0.1]
        from nlklausmeier import verify_derivative_identity

        params = make_params(a=0.0, b=0.0, nu=0.0)
        c = np.zeros(disc8.plant.dim)
        c[0::2] = rng.standard_normal(disc8.m)
        state0 = initial_state(zero_profile(), zero_profile(), disc8)
        state0.coef_u = 0.5 * c
        state0.coef_v = disc8.D_u @ state0.coef_u
        traj = integrate(state0, params, ops8_nu0, disc8, T=0.1, dt=1e-3)
        checks = verify_derivative_identity(traj, disc8, tol=1e-9)
        assert all(c.passed for c in checks)

    def test_nonlinear_small_data_z_identity(self, disc8, ops8_nu0):
        # a = nu = 0 keeps both identities; small data keeps the
        # nonlinear projection defect at cubic scale
        from nlklausmeier import verify_derivative_identity

        params = make_params(a=0.0, nu=0.0)
        u0 = gaussian_bump(0.0, 0.22, 1e-4)
        w0 = gaussian_bump(0.0, 0.2, 1e-4)
        state0 = initial_state(u0, w0, disc8)
        traj = integrate(state0, params, ops8_nu0, disc8, T=0.1, dt=1e-3)
        checks = verify_derivative_identity(traj, disc8, tol=1e-6)
        assert all(c.passed for c in checks)
