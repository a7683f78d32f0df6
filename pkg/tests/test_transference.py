import math

import numpy as np
import pytest

import spingap as sg
from spingap.errors import CurvatureTooNegative, InvalidL, TooFewSamples
from spingap.spin import rng_stream
from spingap.transference import (ConcentrationProfile, DensityTailModel,
                                  UniversalConstants)

EXP_PROFILE = ConcentrationProfile(raw=lambda r: np.exp(-np.asarray(r, float)))


class TestProfiles:
    def test_clipping(self):
        assert EXP_PROFILE(0.0) == 0.5
        assert EXP_PROFILE(3.0) == pytest.approx(math.exp(-3))

    def test_pessimistic_inverse_exponential(self):
        assert sg.pessimistic_inverse(EXP_PROFILE, math.exp(-2)) == pytest.approx(2.0, abs=1e-10)

    def test_pessimistic_inverse_constant_half(self):
        const = ConcentrationProfile(raw=lambda r: np.full_like(np.asarray(r, float), 0.5))
        assert sg.pessimistic_inverse(const, 0.25) == math.inf

    def test_pessimistic_inverse_gaussian(self):
        prof = ConcentrationProfile(raw=lambda r: np.exp(-np.asarray(r, float) ** 2))
        assert sg.pessimistic_inverse(prof, math.exp(-4)) == pytest.approx(2.0, abs=1e-10)


class TestTransferPointwise:
    def test_constant_density_model(self):
        m = DensityTailModel(m=lambda e: 2.0)   # beta(eps) = eps/2
        out = sg.transfer_pointwise(EXP_PROFILE, m)
        # threshold 2 K1^{-1}(1/8) = 2 log 8
        assert out.support_note == pytest.approx(2 * math.log(8), abs=1e-9)
        assert out(6.0) == pytest.approx(4 * math.exp(-3), rel=1e-10)

    def test_clipped_below_threshold(self):
        m = DensityTailModel(m=lambda e: 1.0)
        out = sg.transfer_pointwise(EXP_PROFILE, m)
        assert out(0.5 * out.support_note) == 0.5

    def test_quadratic_beta(self):
        m = DensityTailModel(m=lambda e: 1.0 / e)  # beta = eps^2, beta^{-1} = sqrt
        out = sg.transfer_pointwise(EXP_PROFILE, m)
        assert out(10.0) == pytest.approx(2 * math.exp(-2.5), rel=1e-9)

    def test_output_profile_shape(self):
        m = DensityTailModel(m=lambda e: 2.0)
        out = sg.transfer_pointwise(EXP_PROFILE, m)
        rs = np.linspace(0.0, 20.0, 40)
        vals = out(rs)
        assert np.all(vals <= 0.5 + 1e-15)
        assert np.all(np.diff(vals) <= 1e-12)


class TestTransferIntegral:
    def test_power_law(self):
        # F = x^4, L = 1: K2(r) = 2 K1(r/2)^{3/4}
        out = sg.transfer_integral(EXP_PROFILE, lambda x: x ** 3, 1.0)
        assert out(8.0) == pytest.approx(2 * math.exp(-3), rel=1e-11)

    def test_identity_g(self):
        out = sg.transfer_integral(EXP_PROFILE, lambda x: x, 1.0)
        assert out(8.0) == pytest.approx(2 * math.exp(-2), rel=1e-11)

    def test_huge_l_vacuous(self):
        out = sg.transfer_integral(EXP_PROFILE, lambda x: x, 1e12)
        assert out(5.0) == 0.5

    def test_reproduces_ls_proof_bound(self):
        # with G = x^{p-1} and level L^p, the transferred profile must equal
        # min(1/2, 2 L K1(r/2)^{1-1/p}) pointwise
        rho, p, L = 1.0, 4.0, 1.7
        base = sg.profile_from_lsi(rho)
        out = sg.transfer_integral(base, lambda x: x ** (p - 1.0), L ** p)
        r0 = math.sqrt(2 * math.log(2) / rho)
        for r in np.linspace(0.0, 14.0, 57):
            closed = min(0.5, 2.0 * L * base(r / 2.0) ** (1.0 - 1.0 / p))
            assert abs(out(r) - closed) <= 1e-12
        # algebraic form of the same bound
        r = 9.0
        algebraic = math.exp(math.log(2 * L) - rho * (p - 1) / (8 * p)
                             * max(r - 2 * r0, 0.0) ** 2)
        assert abs(out(r) - algebraic) <= 1e-12


class TestSourceProfiles:
    def test_lsi_profile(self):
        prof = sg.profile_from_lsi(1.0)
        r0 = math.sqrt(2 * math.log(2))
        assert prof(r0) == 0.5
        assert prof(r0 + 2) == pytest.approx(math.exp(-2), rel=1e-12)
        prof4 = sg.profile_from_lsi(4.0)
        assert prof4(math.sqrt(math.log(2) / 2) + 1) == pytest.approx(math.exp(-2), rel=1e-12)

    def test_sg_profile(self):
        prof = sg.profile_from_sg(1.0)
        assert prof(3.0) == pytest.approx(math.exp(-3), rel=1e-12)
        assert prof(0.0) == 0.5
        assert sg.profile_from_sg(4.0)(3.0) == pytest.approx(math.exp(-6), rel=1e-12)


class TestConstants:
    def test_ls_kappa_zero(self):
        assert sg.ls_transfer_constant(1.0, 0.0, 1.0, 2.0) == 0.5

    def test_ls_theta_one_third(self):
        # rho = 8 kappa, p = 4: theta = 1 - 16 kappa/(3 rho) = 1/3
        kappa = 0.3
        got = sg.ls_transfer_constant(8 * kappa, kappa, 1.0, 4.0)
        expected = 8 * kappa * 0.75 * math.exp(-1.0 / (1.0 / 3.0))
        assert got == pytest.approx(expected, rel=1e-12)

    def test_ls_boundary_raises(self):
        p, kappa = 2.0, 0.5
        with pytest.raises(CurvatureTooNegative):
            sg.ls_transfer_constant(4 * p * kappa / (p - 1), kappa, 1.0, p)

    def test_ls_monotonicity(self):
        base = sg.ls_transfer_constant(2.0, 0.05, 2.0, 4.0)
        assert sg.ls_transfer_constant(2.5, 0.05, 2.0, 4.0) >= base
        assert sg.ls_transfer_constant(2.0, 0.08, 2.0, 4.0) <= base
        assert sg.ls_transfer_constant(2.0, 0.05, 3.0, 4.0) <= base

    def test_sg_tv_cases(self):
        assert sg.sg_transfer_tv("sup_ratio", 1.0 + 1e-12) == pytest.approx(1.0, rel=1e-9)
        assert sg.sg_transfer_tv("inv_sup_ratio", 2.0) == pytest.approx(0.0625, rel=1e-12)
        expected = (1.0 / (4 * (1 + math.log(2)))) ** 2
        assert sg.sg_transfer_tv("tv", 2.0) == pytest.approx(expected, rel=1e-12)
        with pytest.raises(InvalidL):
            sg.sg_transfer_tv("sup_ratio", 1.0)

    def test_tv_from_density_tail(self):
        assert sg.tv_from_density_tail(1.0, 0.0) == 0.0
        assert sg.tv_from_density_tail(8.0, 0.125) == pytest.approx(0.890625, rel=1e-15)
        assert sg.tv_from_density_tail(0.5, 0.0) == 0.0

    def test_sg_lp(self):
        assert sg.sg_transfer_lp(1.0, 2.0) == 0.25
        assert sg.sg_transfer_lp(math.e, 2.0) == pytest.approx(0.0625, rel=1e-12)
        # p -> infinity recovers the sup-ratio shape at L = 1
        assert sg.sg_transfer_lp(1.0, 1e9) == pytest.approx(1.0, rel=1e-6)

    def test_sg_median(self):
        assert sg.sg_transfer_median(1.0) == pytest.approx(1 / math.log(8) ** 2, rel=1e-12)
        assert sg.sg_transfer_median(7.0 / 8.0) == pytest.approx(1 / math.log(7) ** 2, rel=1e-12)
        with pytest.raises(InvalidL):
            sg.sg_transfer_median(0.5)

    def test_lp_vs_sup_ratio_shape(self):
        # with equal constants the two multipliers agree within [1/4, 4]
        # as p -> infinity, over L in [1, 100]
        for L in (1.0 + 1e-9, 2.0, 10.0, 100.0):
            lp = sg.sg_transfer_lp(L, 1e9)
            tv = sg.sg_transfer_tv("sup_ratio", L)
            assert 0.25 <= lp / tv <= 4.0

    def test_superimpose(self):
        assert sg.superimpose_lp_bound((1, 1), (1, 1), 2.0) == 1.0
        assert sg.superimpose_lp_bound((16, 0.25), (1, 1), 2.0) == pytest.approx(1.0)
        got = sg.superimpose_lp_bound((math.exp(2), math.exp(0.5)), (1, 1), 2.0)
        assert got == pytest.approx(math.exp(1.5), rel=1e-12)

    def test_constants_must_be_positive(self):
        with pytest.raises(sg.errors.ValidationError):
            UniversalConstants(c_ls=0.0)


class TestSuperimposeQuadratureCrossCheck:
    def test_gaussian_tilt_perturbation(self, gauss):
        # mu2 ~ e^{x/2} mu1: the chain bound with quadrature moments equals
        # e^{1.5}, and dominates the directly computed L^p ratio norm ^p
        f2p = gauss.expect(lambda x: np.exp(2.0 * x))     # int f^{2p}, p=2
        fm2 = gauss.expect(lambda x: np.exp(-x))          # int f^{-2}
        bound = sg.superimpose_lp_bound((f2p, fm2), (1.0, 1.0), 2.0)
        assert bound == pytest.approx(math.exp(1.5), rel=1e-9)
        mu2 = sg.tilt_measure(gauss, 0.5)
        direct = sg.lp_density_ratio(mu2, gauss, 2.0) ** 2.0
        assert direct <= bound + 1e-9
        # Gaussian MGF: int (dmu2/dmu1)^p dmu1 = e^{a^2 p(p-1)/2} = e^{1/4}
        assert direct == pytest.approx(math.exp(0.25), rel=1e-9)


class TestEmpiricalProfile:
    def test_gaussian_tail(self):
        rng = rng_stream(0, 10)
        samples = rng.standard_normal((100_000, 1))
        prof = sg.empirical_profile(samples)
        from scipy.stats import norm
        assert prof(1.0) == pytest.approx(1 - norm.cdf(1.0), abs=5e-3)
        assert prof(0.0) == pytest.approx(0.5, abs=2e-3)

    def test_point_mass(self):
        samples = np.zeros((2000, 2))
        prof = sg.empirical_profile(samples)
        assert prof(0.5) == 0.0

    def test_too_few(self):
        with pytest.raises(TooFewSamples):
            sg.empirical_profile(np.zeros((10, 2)))

    def test_monotone_and_capped(self):
        rng = rng_stream(1, 10)
        prof = sg.empirical_profile(rng.standard_normal((5000, 3)))
        rs = np.linspace(0, 4, 30)
        vals = prof(rs)
        assert np.all(vals <= 0.5)
        assert np.all(np.diff(vals) <= 0)
