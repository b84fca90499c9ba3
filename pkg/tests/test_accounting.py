import math

import numpy as np
import pytest

from autoclip.accounting import (DEFAULT_ORDERS, PrivacySpec, calibrate_sigma,
                                 gdp_epsilon, gdp_mu, rdp_epsilon)
from autoclip.errors import CalibrationError, InvalidArgumentError


class TestGdp:
    def test_mu_closed_form(self):
        sigma, p, steps = 1.3, 0.02, 500
        expect = p * math.sqrt(steps * (math.exp(1.0 / sigma ** 2) - 1.0))
        np.testing.assert_allclose(gdp_mu(sigma, p, steps), expect, rtol=1e-12)

    def test_mu_unit_case(self):
        np.testing.assert_allclose(gdp_mu(1.0, 0.01, 10 ** 4),
                                   math.sqrt(math.e - 1.0), atol=1e-9)

    def test_epsilon_from_mu(self):
        mu, delta = 0.7, 1e-5
        expect = mu ** 2 + mu * math.sqrt(2.0 * math.log(1.0 / delta))
        np.testing.assert_allclose(gdp_epsilon(mu, delta), expect, rtol=1e-12)

    def test_epsilon_zero_mu(self):
        assert gdp_epsilon(0.0, 1e-5) == 0.0

    def test_mu_monotone_in_sigma(self):
        mus = [gdp_mu(s, 0.01, 1000) for s in (0.5, 1.0, 2.0, 4.0)]
        assert all(a > b for a, b in zip(mus, mus[1:]))


class TestRdp:
    def test_no_sampling_no_privacy_loss(self):
        # only the conversion term remains, minimized at the largest order
        expect = math.log(1e5) / (max(DEFAULT_ORDERS) - 1.0)
        np.testing.assert_allclose(rdp_epsilon(1.0, 0.0, 100, 1e-5), expect,
                                   rtol=1e-12)

    def test_full_batch_single_step_matches_analytic(self):
        # p=1, T=1 reduces to the plain Gaussian mechanism: grid-min oracle
        for sigma in (0.7, 1.0, 1.9, 5.0):
            alphas = np.array(DEFAULT_ORDERS)
            oracle = np.min(alphas / (2.0 * sigma ** 2)
                            + math.log(1e5) / (alphas - 1.0))
            np.testing.assert_allclose(rdp_epsilon(sigma, 1.0, 1, 1e-5),
                                       oracle, rtol=1e-6)

    def test_integer_order_moment_consistent_with_brute_force(self):
        # E_{x~N(0,1)}[((1-q) + q e^{(2x-1)/(2 s^2)})^alpha] by quadrature
        from autoclip.accounting import _log_moment_int
        q, sigma, alpha = 0.1, 1.5, 4
        zs = np.linspace(-30 * sigma, 30 * sigma, 400001)
        ratio = (1 - q) + q * np.exp((2 * zs - 1.0) / (2 * sigma ** 2))
        dens = np.exp(-zs ** 2 / (2 * sigma ** 2)) / (sigma * math.sqrt(2 * math.pi))
        est = np.trapezoid(ratio ** alpha * dens, zs)
        np.testing.assert_allclose(_log_moment_int(q, sigma, alpha),
                                   math.log(est), rtol=1e-7)

    def test_fractional_order_between_integer_neighbors(self):
        from autoclip.accounting import _rdp_single
        q, sigma = 0.02, 1.2
        # Renyi divergence is nondecreasing in the order
        vals = [_rdp_single(q, sigma, a) for a in (2.0, 2.5, 3.0)]
        assert vals[0] <= vals[1] <= vals[2]

    def test_epsilon_monotone_decreasing_in_sigma(self):
        eps = [rdp_epsilon(s, 0.01, 1000, 1e-5)
               for s in (0.5, 0.8, 1.2, 2.0, 4.0)]
        assert all(a > b for a, b in zip(eps, eps[1:]))

    def test_epsilon_monotone_increasing_in_steps(self):
        eps = [rdp_epsilon(1.0, 0.01, t, 1e-5) for t in (10, 100, 1000)]
        assert all(a < b for a, b in zip(eps, eps[1:]))

    def test_epsilon_monotone_increasing_in_rate(self):
        eps = [rdp_epsilon(1.0, p, 1000, 1e-5) for p in (0.001, 0.01, 0.1)]
        assert all(a < b for a, b in zip(eps, eps[1:]))

    def test_rejects_bad_args(self):
        with pytest.raises(InvalidArgumentError):
            rdp_epsilon(0.0, 0.1, 10, 1e-5)
        with pytest.raises(InvalidArgumentError):
            rdp_epsilon(1.0, 1.5, 10, 1e-5)
        with pytest.raises(InvalidArgumentError):
            rdp_epsilon(1.0, 0.1, 10, 0.0)


class TestCalibration:
    @pytest.mark.parametrize("method", ["rdp", "gdp"])
    def test_round_trip_within_tolerance(self, method):
        gen = np.random.default_rng(0)
        for _ in range(8):
            spec = PrivacySpec(eps=float(gen.uniform(0.5, 8.0)),
                               delta=10.0 ** -float(gen.uniform(4, 7)),
                               p=float(gen.uniform(0.001, 0.05)),
                               steps=int(gen.integers(100, 5000)))
            sigma = calibrate_sigma(spec, method=method)
            if method == "rdp":
                back = rdp_epsilon(sigma, spec.p, spec.steps, spec.delta)
            else:
                back = gdp_epsilon(gdp_mu(sigma, spec.p, spec.steps),
                                   spec.delta)
            assert back <= spec.eps
            assert back >= spec.eps * 0.99

    def test_reference_regime(self):
        spec = PrivacySpec(3.0, 1e-5, 0.008533, 4688)
        sigma = calibrate_sigma(spec)
        assert 0.5 <= sigma <= 5.0

    def test_unattainable_budget_raises(self):
        spec = PrivacySpec(1e-4, 1e-9, 0.5, 10 ** 6)
        with pytest.raises(CalibrationError):
            calibrate_sigma(spec)

    def test_deterministic(self):
        spec = PrivacySpec(2.0, 1e-6, 0.01, 1000)
        assert calibrate_sigma(spec) == calibrate_sigma(spec)

    def test_accountants_agree_on_scale(self):
        # the two accountants differ in constants, not in order of magnitude
        spec = PrivacySpec(3.0, 1e-5, 0.0256, 390)
        s_rdp = calibrate_sigma(spec, method="rdp")
        s_gdp = calibrate_sigma(spec, method="gdp")
        assert 0.3 < s_gdp / s_rdp < 3.0

    def test_spec_validation(self):
        with pytest.raises(InvalidArgumentError):
            PrivacySpec(0.0, 1e-5, 0.01, 100)
        with pytest.raises(InvalidArgumentError):
            PrivacySpec(1.0, 0.0, 0.01, 100)
        with pytest.raises(InvalidArgumentError):
            PrivacySpec(1.0, 1e-5, 0.0, 100)
        with pytest.raises(InvalidArgumentError):
            PrivacySpec(1.0, 1e-5, 0.01, 0)
