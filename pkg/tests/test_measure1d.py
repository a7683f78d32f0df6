import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.stats import norm

import spingap as sg
from spingap.errors import (InvalidBound, NonIntegrable, NotWeaklyGaussian,
                            OutOfRange, TiltDiverges)

E = math.e


class TestNormalize:
    def test_standard_gaussian_with_constant(self, gauss):
        assert abs(gauss.log_z) <= 1e-10
        assert abs(gauss.barycenter) <= 1e-12
        assert abs(gauss.total_mass - 1.0) <= 1e-10

    def test_gaussian_without_constant(self):
        pot = sg.Potential1D(v=lambda x: np.asarray(x, float) ** 2 / 2,
                             dv=lambda x: np.asarray(x, float))
        m = sg.normalize(pot, (-10, 10), extend=False)
        assert abs(m.log_z - 0.5 * math.log(2 * math.pi)) <= 1e-10

    def test_two_sided_exponential(self, tse):
        assert abs(tse.log_z) <= 1e-10
        assert abs(tse.barycenter) <= 1e-12

    def test_degenerate_window(self):
        with pytest.raises(sg.errors.DegenerateWindow):
            sg.normalize(sg.gaussian(), (3.0, 3.0), extend=False)

    def test_tail_test_failure(self):
        with pytest.raises(NonIntegrable):
            sg.normalize(sg.two_sided_exp(), (-5.0, 5.0), extend=False)

    def test_unbounded_below(self):
        pot = sg.Potential1D(v=lambda x: -np.asarray(x, float) ** 2)
        with pytest.raises(NonIntegrable):
            sg.normalize(pot, (-10, 10), extend=False)


class TestMoments:
    def test_gaussian_m2(self, gauss):
        assert abs(gauss.moment(2) - 1.0) <= 1e-12

    def test_tse_m2_gamma3(self, tse):
        # closed form: integral 0..inf of x^2 e^{-x} dx = Gamma(3) = 2,
        # cross-checked against direct quadrature
        oracle = quad(lambda x: x * x * 0.5 * math.exp(-abs(x)), -40, 40)[0]
        assert abs(oracle - 2.0) <= 1e-9
        assert abs(tse.moment(2) - 2.0) <= 1e-9

    def test_tse_m3_gamma4(self, tse):
        oracle = quad(lambda x: abs(x) ** 3 * 0.5 * math.exp(-abs(x)), -40, 40)[0]
        assert abs(oracle - 6.0) <= 1e-8
        assert abs(tse.moment(3) - 6.0) <= 1e-8

    def test_moment_cache(self, gauss):
        assert gauss.moment(2.0) is not None
        assert 2.0 in gauss._moments


class TestPsi1:
    def test_constant_one(self, tse):
        assert abs(sg.psi1_norm(tse, lambda x: np.ones_like(x)) - 1.0) <= 1e-7

    def test_constant_scaling(self, gauss):
        c = 3.7
        got = sg.psi1_norm(gauss, lambda x: np.full_like(x, c))
        assert abs(got - c) <= 1e-6 * c

    def test_tse_abs_x(self, tse):
        # E exp(|X|/lam) = 1/(1 - 1/lam); solving = e gives lam = e/(e-1)
        expected = E / (E - 1.0)
        assert abs(sg.psi1_norm(tse, np.abs) - expected) <= 2e-6

    def test_not_subexponential(self, gauss):
        with pytest.raises(sg.errors.NotSubExponential):
            sg.psi1_norm(gauss, lambda x: np.exp(np.abs(x) ** 2) * 1e9, cap=10.0)

    @settings(max_examples=20, deadline=None)
    @given(a=st.floats(-2, 2), b=st.floats(-2, 2), c=st.floats(0.1, 2), d=st.floats(0.1, 2))
    def test_triangle_inequality(self, gauss, a, b, c, d):
        y = lambda x: a * x + c * np.abs(x)
        z = lambda x: b * x + d * x ** 2 / (1 + np.abs(x))
        ny = sg.psi1_norm(gauss, y)
        nz = sg.psi1_norm(gauss, z)
        nyz = sg.psi1_norm(gauss, lambda x: y(x) + z(x))
        assert nyz <= ny + nz + 1e-6


class TestStats:
    def test_gaussian(self, gauss_stats):
        st_ = gauss_stats
        assert abs(st_.d2_delta - 1.0) <= 1e-10
        assert st_.kappa == 0.0
        assert abs(st_.var - 1.0) <= 1e-10
        assert abs(st_.density_sup - 1.0 / math.sqrt(2 * math.pi)) <= 1e-9

    def test_tse_lipschitz_d1(self, tse_stats):
        # |V'| = 1 a.e., so D_1 is the Psi_1 norm of the constant 1
        assert abs(tse_stats.d1_psi1 - 1.0) <= 1e-6

    def test_d2_dominated_by_psi1(self, gauss_stats, tse_stats):
        for st_ in (gauss_stats, tse_stats):
            assert st_.d2_delta <= st_.d2_psi1_delta * math.e + 1e-9

    def test_var_le_m2(self, gauss_stats, tse_stats):
        for st_ in (gauss_stats, tse_stats):
            assert st_.var <= st_.m2 + 1e-12

    def test_missing_derivative(self):
        pot = sg.Potential1D(v=lambda x: np.asarray(x, float) ** 2 / 2,
                             default_window=(-10, 10))
        m = sg.normalize(pot)
        with pytest.raises(sg.errors.MissingDerivative):
            sg.stats(m, 1.0)


class TestTilt:
    def test_gaussian_mean_shift(self, gauss):
        t = sg.tilt_measure(gauss, 0.7)
        assert abs(t.barycenter - 0.7) <= 1e-10
        assert abs(t.total_mass - 1.0) <= 1e-10

    def test_tse_closed_form(self, tse):
        # Z^a = 1/(1-a^2), s(a) = 2a/(1-a^2); at a = 1/2 the barycenter is 4/3
        t = sg.tilt_measure(tse, 0.5)
        assert abs(t.barycenter - 4.0 / 3.0) <= 1e-10

    def test_tse_diverges_at_one(self, tse):
        with pytest.raises(TiltDiverges):
            sg.tilt_measure(tse, 1.0)

    def test_monotone_in_a(self, tse):
        bars = [sg.tilt_measure(tse, a).barycenter for a in (-0.5, -0.2, 0.0, 0.3, 0.6)]
        assert all(b2 > b1 for b1, b2 in zip(bars, bars[1:]))

    def test_invert_identity_for_gaussian(self, gauss):
        assert abs(sg.invert_tilt(gauss, 0.3) - 0.3) <= 1e-9

    def test_invert_tse(self, tse):
        assert abs(sg.invert_tilt(tse, 4.0 / 3.0) - 0.5) <= 1e-9

    def test_invert_symmetric_zero(self, tse, gauss):
        assert sg.invert_tilt(tse, 0.0) == 0.0
        assert sg.invert_tilt(gauss, 0.0) == 0.0

    def test_round_trip(self, tse, gauss):
        for m, a_vals in ((tse, (-0.7, 0.3, 0.8)), (gauss, (-2.0, 1.3))):
            for a in a_vals:
                s = sg.tilt_measure(m, a).barycenter
                assert abs(sg.invert_tilt(m, s) - a) <= 1e-8

    def test_out_of_range_uniform(self, unif):
        with pytest.raises(OutOfRange):
            sg.invert_tilt(unif, 2.0)

    def test_recentred_gaussian(self, gauss):
        r = sg.recentred_tilt(gauss, 1.7)
        assert abs(r.barycenter) <= 1e-10
        assert abs(r.var - 1.0) <= 1e-9

    def test_recentred_identity(self, tse):
        r = sg.recentred_tilt(tse, 0.0)
        assert abs(r.barycenter - tse.barycenter) <= 1e-12

    def test_recentred_tse_variance(self, tse):
        # Var = s'(a) = 2(1+a^2)/(1-a^2)^2 = 40/9 at a = 1/2
        r = sg.recentred_tilt(tse, 0.5)
        assert abs(r.barycenter) <= 1e-10
        assert abs(r.var - 40.0 / 9.0) <= 1e-9


class TestCertifiedBounds:
    def test_bakry_emery_gaussian(self):
        assert sg.bakry_emery_lsi(sg.gaussian()) == 1.0

    def test_bakry_emery_degenerate(self):
        pot = sg.Potential1D(v=lambda x: np.asarray(x, float) ** 4,
                             dv=lambda x: 4 * np.asarray(x, float) ** 3,
                             d2v=lambda x: 12 * np.asarray(x, float) ** 2,
                             default_window=(-3, 3))
        assert sg.bakry_emery_lsi(pot) is None

    def test_bakry_emery_cosine(self):
        # inf of V'' = 1 - cos(x)/4 is 3/4 (attained where cos = 1)
        pot = sg.Potential1D(v=lambda x: np.asarray(x, float) ** 2 / 2 + np.cos(x) / 4,
                             dv=lambda x: np.asarray(x, float) - np.sin(x) / 4,
                             d2v=lambda x: 1 - np.cos(x) / 4,
                             default_window=(-12, 12))
        assert abs(sg.bakry_emery_lsi(pot) - 0.75) <= 1e-9

    def test_holley_stroock(self):
        assert sg.holley_stroock(1.0, 1.0, 1.0) == 1.0
        assert sg.holley_stroock(1.0, 2.0, 2.0) == 0.25
        w = 2.0
        got = sg.holley_stroock(0.5, math.exp(w / 2), math.exp(w / 2))
        assert abs(got - 0.5 * math.exp(-2.0)) <= 1e-15
        with pytest.raises(InvalidBound):
            sg.holley_stroock(1.0, 0.5, 1.0)

    def test_weakly_gaussian_certificate_values(self):
        assert sg.weakly_gaussian_certificate(1, 1, 0)["rho_lower"] == 1.0
        assert abs(sg.weakly_gaussian_certificate(2, 3, math.log(2))["rho_lower"] - 1.0) <= 1e-15
        cert = sg.weakly_gaussian_certificate(1, 5, 1)
        assert cert["d2_upper"] == 5.0
        assert abs(cert["kappa"] - math.exp(-1) / 8) <= 1e-15

    def test_weakly_gaussian_validation(self):
        pot = sg.weakly_gaussian(alpha=1.0, omega=0.5)
        cert = sg.weakly_gaussian_certificate(1.0, 2.0, 0.5, potential=pot)
        assert cert["rho_lower"] == pytest.approx(math.exp(-0.5))
        with pytest.raises(NotWeaklyGaussian):
            sg.weakly_gaussian_certificate(2.0, 2.0, 0.5, potential=pot)

    def test_not_weakly_gaussian_without_decomposition(self, gauss):
        with pytest.raises(NotWeaklyGaussian):
            sg.weakly_gaussian_certificate(1.0, 1.0, 0.0, potential=sg.two_sided_exp())


class TestDistances:
    def test_tv_self(self, gauss):
        assert sg.tv_distance(gauss, gauss) <= 1e-12

    def test_tv_disjoint(self):
        u1 = sg.normalize(sg.uniform(1.0))
        pot2 = sg.uniform(1.0).shifted(-5.0)
        u2 = sg.normalize(pot2, (4.0, 6.0))
        assert abs(sg.tv_distance(u1, u2) - 1.0) <= 1e-12

    def test_tv_shifted_gaussians(self, gauss):
        g2 = sg.normalize(sg.gaussian().shifted(-1.0), (-9, 11), extend=False)
        expected = 2 * norm.cdf(0.5) - 1
        assert abs(sg.tv_distance(gauss, g2) - expected) <= 1e-9

    def test_lp_self(self, gauss):
        assert abs(sg.lp_density_ratio(gauss, gauss, 2.0) - 1.0) <= 1e-12

    def test_lp_truncated_gaussian(self, gauss):
        from dataclasses import replace
        tp = replace(sg.gaussian(), hard_support=True, default_window=(-1.0, 1.0))
        tg = sg.normalize(tp, (-1, 1))
        m = 2 * norm.cdf(1.0) - 1
        assert abs(sg.lp_density_ratio(tg, gauss, 2.0) - m ** -0.5) <= 1e-10

    def test_lp_shifted_gaussian_mgf(self, gauss):
        # int (dmu2/dmu1)^p dmu1 = e^{a^2 p (p-1)/2} for N(a,1) vs N(0,1)
        g2 = sg.normalize(sg.gaussian().shifted(-2.0), (-8, 12), extend=False)
        assert abs(sg.lp_density_ratio(g2, gauss, 4.0) - math.exp(6.0)) <= 1e-8 * math.exp(6.0)

    def test_lp_jensen(self, gauss, tse):
        assert sg.lp_density_ratio(gauss, tse, 2.0) >= 1.0

    def test_lp_not_absolutely_continuous(self, unif):
        wide = sg.normalize(sg.uniform(2.0))
        with pytest.raises(sg.errors.NotAbsolutelyContinuous):
            sg.lp_density_ratio(wide, unif, 2.0)

    def test_lp_diverges(self, gauss, tse):
        # (dmu_gauss/dmu_exp)^4 dmu_exp has integrand e^{-2x^2 + 3|x|}: fine;
        # the reverse with p large enough diverges: (e^{-|x|}/e^{-x^2/2})^p e^{-x^2/2}
        # = exp((p-1)x^2/2 - p|x|) grows without bound
        with pytest.raises(sg.errors.QuadratureDiverges):
            sg.lp_density_ratio(tse, gauss, 3.0)


class TestWDecompose:
    def test_identity_random(self, gauss):
        rng = np.random.default_rng(1)
        xs = rng.normal(size=50)
        pot = sg.gaussian()
        for eps in (0.7, -0.4, 1.3):
            w1, w2 = sg.w_decompose(pot, eps)
            lhs = pot.v(xs + eps) - pot.v(xs)
            rhs = eps * w1(xs) + eps ** 2 / 2 * w2(xs)
            assert np.max(np.abs(lhs - rhs)) <= 1e-12

    def test_lipschitz_bounds(self):
        pot = sg.two_sided_exp()
        grid = np.linspace(-20, 20, 2001)
        for eps in (1.0, 0.5, -1.0):
            w1, w2 = sg.w_decompose(pot, eps)
            assert np.max(np.abs(w1(grid))) <= 4.0  # C*L with a moderate C
            assert np.max(np.abs(w2(grid))) <= 4.0

    def test_linear_potential(self):
        pot = sg.Potential1D(v=lambda x: np.asarray(x, float))
        w1, w2 = sg.w_decompose(pot, 1.0)
        xs = np.array([-3.0, 0.0, 2.5])
        assert np.allclose(w1(xs), 1 - math.exp(-1), atol=1e-15)
        assert np.allclose(w2(xs), 2 * math.exp(-1), atol=1e-15)

    def test_centering(self, gauss, tse):
        for m, eps in ((gauss, 0.8), (tse, 0.6), (tse, -1.1)):
            w1, _ = sg.w_decompose(m.potential, eps)
            val = m.integrate(w1, extra_breakpoints=[bp - eps for bp in m.potential.breakpoints])
            assert abs(val) <= 1e-10


class TestLogConcaveFacts:
    def test_facts_suite(self, log_concave_corpus):
        for name, m in log_concave_corpus.items():
            grid = np.linspace(*m.window, 8193)
            dens = m.density(grid)
            fsup = float(dens.max())
            f0 = float(m.density(np.array([m.barycenter]))[0])
            assert f0 >= fsup / math.e - 1e-12, name
            assert 0.05 <= fsup ** 2 * m.var <= 1.0, name
            for p, q in ((1.0, 2.0), (2.0, 4.0)):
                lhs = m.moment(q) ** (1 / q)
                rhs = 3.0 * (q / p) * m.moment(p) ** (1 / p)
                assert lhs <= rhs, (name, p, q)
