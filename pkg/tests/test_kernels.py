import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlklausmeier import KernelSpec, eval_gamma, eval_gamma_dz, kernel_report
from nlklausmeier.kernels import gamma_mass


_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def quad_oracle(fn, radius, n=200000):
    """Trapezoid oracle over [-radius, radius], independent of the package quadrature.

    Even n keeps grid points off z = 0, where kink kernels take the
    symmetric-derivative convention value.
    """
    z = np.linspace(-radius, radius, n)
    return _trapezoid(fn(z), z)


def triangular_spec():
    z = np.linspace(0.0, 1.0, 21)
    return KernelSpec("tabulated", table=np.column_stack([z, np.maximum(0.0, 1.0 - z)]))


class TestEvalGamma:
    def test_laplace_peak(self):
        spec = KernelSpec("laplace", epsilon=0.5)
        assert eval_gamma(spec, 0.0) == pytest.approx(1.0)

    def test_gaussian_peak(self):
        spec = KernelSpec("gaussian", epsilon=1.0)
        assert eval_gamma(spec, 0.0) == pytest.approx(1.0 / math.sqrt(2.0 * math.pi))

    @given(st.floats(-30.0, 30.0), st.sampled_from(["gaussian", "laplace"]),
           st.floats(0.1, 3.0))
    def test_even_in_z(self, z, family, eps):
        spec = KernelSpec(family, epsilon=eps)
        assert eval_gamma(spec, z) == eval_gamma(spec, -z)

    def test_tabulated_even_and_zero_outside(self):
        spec = triangular_spec()
        assert eval_gamma(spec, 0.7) == pytest.approx(eval_gamma(spec, -0.7))
        assert eval_gamma(spec, 2.5) == 0.0

    def test_normalization_scales(self):
        a = KernelSpec("laplace", epsilon=0.5)
        b = KernelSpec("laplace", epsilon=0.5, normalization=3.0)
        assert eval_gamma(b, 0.4) == pytest.approx(3.0 * eval_gamma(a, 0.4))


class TestEvalGammaDz:
    def test_gaussian_flat_at_origin(self):
        spec = KernelSpec("gaussian", epsilon=1.0)
        assert eval_gamma_dz(spec, 0.0) == 0.0

    def test_laplace_closed_form(self):
        spec = KernelSpec("laplace", epsilon=0.5)
        assert eval_gamma_dz(spec, 1.0) == pytest.approx(-2.0 * math.exp(-2.0))

    def test_laplace_origin_convention(self):
        spec = KernelSpec("laplace", epsilon=0.5)
        assert eval_gamma_dz(spec, 0.0) == 0.0

    @given(st.floats(0.01, 20.0), st.sampled_from(["gaussian", "laplace"]))
    def test_odd_in_z(self, z, family):
        spec = KernelSpec(family, epsilon=0.7)
        assert eval_gamma_dz(spec, z) == -eval_gamma_dz(spec, -z)

    def test_matches_finite_differences(self):
        spec = KernelSpec("gaussian", epsilon=0.8)
        z = np.linspace(0.1, 3.0, 17)
        h = 1e-6
        fd = (eval_gamma(spec, z + h) - eval_gamma(spec, z - h)) / (2 * h)
        assert np.abs(eval_gamma_dz(spec, z) - fd).max() < 1e-8


class TestKernelReport:
    def test_gaussian_identities(self):
        rep = kernel_report(KernelSpec("gaussian", epsilon=1.0))
        assert rep.gamma_mass == pytest.approx(1.0)
        assert rep.second_moment == pytest.approx(1.0)
        assert rep.hypothesis_satisfied and rep.symmetric and rep.strictly_positive

    def test_laplace_identities(self):
        rep = kernel_report(KernelSpec("laplace", epsilon=0.5))
        assert rep.gamma_mass == pytest.approx(1.0)
        assert rep.second_moment == pytest.approx(0.5)
        assert rep.l1_gamma_prime == pytest.approx(2.0)
        assert rep.l2_gamma == pytest.approx(1.0 / (2.0 * math.sqrt(0.5)))

    @pytest.mark.parametrize("family,eps", [("gaussian", 0.7), ("laplace", 0.6)])
    def test_closed_forms_match_quadrature(self, family, eps):
        spec = KernelSpec(family, epsilon=eps)
        rep = kernel_report(spec)
        R = spec.support_radius
        mass_q = quad_oracle(lambda z: eval_gamma(spec, z), R)
        mom_q = quad_oracle(lambda z: z**2 * eval_gamma(spec, z), R)
        l1p_q = quad_oracle(lambda z: np.abs(eval_gamma_dz(spec, z)), R)
        assert rep.gamma_mass == pytest.approx(mass_q, rel=1e-7)
        assert rep.second_moment == pytest.approx(mom_q, rel=1e-6)
        assert rep.l1_gamma_prime == pytest.approx(l1p_q, rel=1e-6)

    @pytest.mark.parametrize("family", ["gaussian", "laplace"])
    def test_second_moment_scales_like_eps_squared(self, family):
        eps = 0.4
        m1 = kernel_report(KernelSpec(family, epsilon=eps)).second_moment
        m2 = kernel_report(KernelSpec(family, epsilon=2 * eps)).second_moment
        assert m2 / m1 == pytest.approx(4.0, abs=1e-8)

    def test_triangular_fails_strict_positivity(self):
        with pytest.warns(UserWarning, match="strict positivity"):
            rep = kernel_report(triangular_spec())
        assert rep.gamma_mass == pytest.approx(1.0, rel=1e-12)
        assert rep.second_moment == pytest.approx(1.0 / 6.0, rel=1e-10)
        assert not rep.strictly_positive
        assert not rep.hypothesis_satisfied
        assert rep.reasons

    def test_gamma_mass_helper(self):
        assert gamma_mass(KernelSpec("laplace", epsilon=0.3)) == 1.0
        assert gamma_mass(triangular_spec()) == pytest.approx(1.0, rel=1e-12)


class TestValidation:
    def test_epsilon_must_be_positive(self):
        with pytest.raises(ValueError):
            KernelSpec("gaussian", epsilon=0.0)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            KernelSpec("cauchy", epsilon=1.0)

    def test_negative_samples_rejected(self):
        table = np.column_stack([np.linspace(0, 1, 5), [-0.1, 0.2, 0.3, 0.2, 0.1]])
        with pytest.raises(ValueError):
            KernelSpec("tabulated", table=table)

    def test_asymmetric_range_rejected(self):
        table = np.column_stack([np.linspace(-0.5, 1.0, 7), np.ones(7)])
        with pytest.raises(ValueError):
            KernelSpec("tabulated", table=table)

    def test_signed_symmetric_table_folds(self):
        z = np.linspace(-1, 1, 9)
        spec = KernelSpec("tabulated", table=np.column_stack([z, 1.0 - np.abs(z)]))
        assert eval_gamma(spec, 0.5) == pytest.approx(0.5)
