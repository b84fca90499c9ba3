import math

import numpy as np
import pytest

from autoclip.bounds import (AuditReport, TheoryParams, bound_input,
                             descent_distance, descent_distance_inv,
                             descent_factor, distance_inv_sup, envelope,
                             grad_norm_bound, grad_norm_bound_curve,
                             hyperbola, lemma_audit, min_descent_factor,
                             min_descent_factor_numeric, optimal_lr,
                             sgd_baseline)
from autoclip.errors import DomainError, InvalidArgumentError


class TestDescentFactor:
    def test_spot_value(self):
        np.testing.assert_allclose(descent_factor(1.0, 2.0, 1.0), 0.25,
                                   rtol=1e-12)

    def test_c_zero_collapses_to_single_term(self):
        s, g = 3.0, 0.7
        expect = 2.0 / (math.sqrt(s * s + 1.0) + g)
        np.testing.assert_allclose(descent_factor(0.0, s, g), expect,
                                   rtol=1e-12)

    def test_degenerate_second_term_at_c_s_one(self):
        # the second term's numerator and denominator both vanish; its
        # limit is 0, leaving only the first term
        assert descent_factor(1.0, 1.0, 0.0) == 1.0

    def test_vectorized(self):
        cs = np.linspace(0.0, 1.0, 7)
        out = descent_factor(cs, 2.0, 0.5)
        assert out.shape == cs.shape

    def test_rejects_c_outside_unit_interval(self):
        with pytest.raises(InvalidArgumentError):
            descent_factor(1.2, 1.0, 0.0)
        with pytest.raises(InvalidArgumentError):
            descent_factor(-0.1, 1.0, 0.0)


class TestMinDescentFactor:
    def test_closed_form_matches_golden_section(self):
        gen = np.random.default_rng(0)
        for _ in range(200):
            r = float(gen.uniform(1.0, 8.0))
            g = float(gen.uniform(1e-3, 5.0))
            closed = min_descent_factor(r, g)
            numeric = min_descent_factor_numeric(r, g)
            np.testing.assert_allclose(closed, numeric, atol=1e-9)

    def test_brute_force_oracle(self):
        cs = np.linspace(1e-9, 1.0, 200001)
        for r, g in ((1.5, 0.4), (3.0, 2.0), (0.5, 1.0), (0.8, 0.2)):
            brute = float(np.min(descent_factor(cs, r, g)))
            np.testing.assert_allclose(min_descent_factor(r, g), brute,
                                       atol=1e-7)

    def test_zero_gamma_above_one(self):
        assert min_descent_factor(2.0, 0.0) == 0.0

    def test_below_one_positive_with_zero_gamma(self):
        # for ratio < 1 the second term cannot vanish, so the min stays > 0
        assert min_descent_factor(0.5, 0.0) > 0.2


class TestDistance:
    def test_round_trip(self):
        gen = np.random.default_rng(1)
        for _ in range(100):
            r = float(gen.uniform(1.01, 50.0))
            xi = float(gen.uniform(0.0, 30.0))
            gamma = float(gen.uniform(1e-3, 2.0))
            x = float(gen.uniform(0.0, 10.0))
            y = descent_distance(x, r, xi, gamma)
            back = descent_distance_inv(y, r, xi, gamma)
            np.testing.assert_allclose(back, x, rtol=1e-8, atol=1e-10)

    def test_monotone_increasing(self):
        xs = np.linspace(0.0, 5.0, 400)
        ys = descent_distance(xs, 2.0, 3.0, 0.5)
        assert np.all(np.diff(ys) > 0)

    def test_image_stays_below_sup(self):
        sup = distance_inv_sup(2.0, 0.5)
        ys = descent_distance(np.linspace(0.0, 1e6, 100), 2.0, 3.0, 0.5)
        assert np.all(ys < sup)

    def test_inverse_domain_error_names_sup(self):
        sup = distance_inv_sup(3.0, 1.0)
        with pytest.raises(DomainError, match=str(sup)[:8]):
            descent_distance_inv(sup, 3.0, 1.0, 1.0)

    def test_small_y_slope(self):
        # d(inverse)/dy at 0+ equals ((xi+gamma)^2 r/xi - xi/r) / (2 gamma)
        r, xi, gamma = 2.5, 4.0, 0.3
        slope = ((xi + gamma) ** 2 * r / xi - xi / r) / (2.0 * gamma)
        y = 1e-9
        fd = descent_distance_inv(y, r, xi, gamma) / y
        np.testing.assert_allclose(fd, slope, rtol=1e-4)

    def test_requires_r_above_one(self):
        with pytest.raises(InvalidArgumentError):
            descent_distance(1.0, 1.0, 1.0, 1.0)


class TestEnvelope:
    def test_upper_concave_dominates_samples(self):
        gen = np.random.default_rng(2)
        xs = np.sort(gen.uniform(0, 10, 40))
        xs += np.arange(40) * 1e-6  # make strictly increasing
        ys = gen.standard_normal(40)
        env = envelope(np.column_stack([xs, ys]), "upper_concave")
        assert np.all(env(xs) >= ys - 1e-12)

    def test_lower_convex_is_dominated(self):
        gen = np.random.default_rng(3)
        xs = np.linspace(0, 1, 30)
        ys = gen.standard_normal(30)
        env = envelope(np.column_stack([xs, ys]), "lower_convex")
        assert np.all(env(xs) <= ys + 1e-12)

    def test_concave_function_is_reproduced(self):
        xs = np.linspace(0.1, 4.0, 50)
        ys = np.sqrt(xs)
        env = envelope(np.column_stack([xs, ys]), "upper_concave")
        np.testing.assert_allclose(env(xs), ys, rtol=1e-12)

    def test_convex_function_upper_envelope_is_chord(self):
        xs = np.linspace(0.0, 1.0, 50)
        ys = xs ** 2
        env = envelope(np.column_stack([xs, ys]), "upper_concave")
        np.testing.assert_allclose(env(xs), xs, atol=1e-12)

    def test_rejects_unsorted(self):
        with pytest.raises(InvalidArgumentError):
            envelope([(1.0, 0.0), (0.5, 1.0)], "upper_concave")

    def test_rejects_unknown_mode(self):
        with pytest.raises(InvalidArgumentError):
            envelope([(0.0, 0.0), (1.0, 1.0)], "sideways")


class TestGradNormBound:
    def test_stabilized_bound_brute_force_oracle(self):
        # dense ratio scan must not find anything meaningfully below
        xi, gamma = 25.0, 0.01
        for x in (1e-3, 1e-2, 1e-1):
            got = grad_norm_bound(x, xi, gamma, "auto_s")
            rs = np.logspace(math.log10(1.001), 6, 20000)
            best = math.inf
            for r in rs:
                sup = distance_inv_sup(r, gamma)
                if x >= 0.999 * sup:
                    continue
                best = min(best, xi / r
                           + descent_distance_inv(x, r, xi, gamma))
            assert got <= best * (1.0 + 1e-6)

    def test_unstabilized_floor(self):
        xi = 25.0
        for x in (1e-4, 1e-2, 1.0):
            assert grad_norm_bound(x, xi, 0.0, "auto_v") >= xi

    def test_stabilized_vanishes_with_x(self):
        xi, gamma = 25.0, 0.01
        vals = [grad_norm_bound(x, xi, gamma, "auto_s")
                for x in (1e-1, 1e-3, 1e-5)]
        assert vals[0] > vals[1] > vals[2]
        # far below the floor the unstabilized bound is stuck at
        assert vals[2] < xi / 10.0

    def test_curve_slope(self):
        ts = np.logspace(8, 12, 17)
        vals = grad_norm_bound_curve(10.0 / np.sqrt(ts), 25.0, 0.01, "auto_s")
        slope = np.polyfit(np.log(ts), np.log(vals), 1)[0]
        assert abs(slope + 0.25) < 0.03

    def test_rejects_bad_mode(self):
        with pytest.raises(InvalidArgumentError):
            grad_norm_bound(0.1, 1.0, 0.1, "auto_x")


class TestScalars:
    def test_sgd_baseline_power_law(self):
        v1 = sgd_baseline(1e4, 1.0, 2.0, 3.0, 16)
        v2 = sgd_baseline(1e8, 1.0, 2.0, 3.0, 16)
        np.testing.assert_allclose(v1 / v2, 10.0, rtol=1e-12)
        np.testing.assert_allclose(
            sgd_baseline(1.0, 1.0, 2.0, 3.0, 16),
            math.sqrt(2.0 * 1.0 * 2.0 + 9.0 / 16.0), rtol=1e-12)

    def test_optimal_lr_minimizes_hyperbola(self):
        params = TheoryParams(xi=3.0, gamma=0.01, lipschitz=2.0,
                              loss_gap=1.5, dim=100, batch=32.0,
                              sigma=1.3, steps=1000)
        eta0 = optimal_lr(params)
        base = hyperbola(eta0, params)
        for bump in (0.9, 0.99, 1.01, 1.1):
            assert hyperbola(eta0 * bump, params) >= base

    def test_optimal_lr_gdp_form(self):
        params = TheoryParams(xi=3.0, gamma=0.01, lipschitz=2.0,
                              loss_gap=1.5, dim=100, batch=32.0,
                              sigma=1.3, steps=1000, mu=1.0, n_data=50000)
        mn2 = params.mu ** 2 * params.n_data ** 2
        expect = math.sqrt(params.loss_gap * mn2
                           / (params.lipschitz * (mn2 + params.dim * params.steps)))
        np.testing.assert_allclose(optimal_lr(params, "gdp"), expect,
                                   rtol=1e-12)

    def test_bound_input_direct(self):
        params = TheoryParams(xi=3.0, gamma=0.01, lipschitz=2.0,
                              loss_gap=1.5, dim=100, batch=32.0,
                              sigma=1.3, steps=1000)
        inflate = 1.0 + params.sigma ** 2 * params.dim / params.batch ** 2
        expect = 4.0 / math.sqrt(params.steps) * math.sqrt(
            params.loss_gap * params.lipschitz * inflate)
        np.testing.assert_allclose(bound_input(params), expect, rtol=1e-12)

    def test_bound_input_gdp_inverts_mu(self):
        # the implied sigma^2 satisfies the mu relation exactly
        params = TheoryParams(xi=3.0, gamma=0.01, lipschitz=2.0,
                              loss_gap=1.5, dim=100, batch=64.0,
                              sigma=1.0, steps=2000, mu=0.8, n_data=30000)
        sigma_sq = 1.0 / math.log1p(
            params.mu ** 2 * params.n_data ** 2
            / (params.batch ** 2 * params.steps))
        p_step = params.batch / params.n_data
        from autoclip.accounting import gdp_mu
        np.testing.assert_allclose(
            gdp_mu(math.sqrt(sigma_sq), p_step, params.steps), params.mu,
            rtol=1e-12)
        assert bound_input(params, "gdp") > 0

    def test_gdp_mode_requires_mu(self):
        params = TheoryParams(xi=1.0, gamma=0.1, lipschitz=1.0, loss_gap=1.0,
                              dim=10, batch=8.0, sigma=1.0, steps=100)
        with pytest.raises(InvalidArgumentError):
            bound_input(params, "gdp")


class TestLemmaAudit:
    def test_default_grids_clean(self):
        report = lemma_audit()
        assert isinstance(report, AuditReport)
        assert report.ok
        assert report.checked >= 2 * 100 * 100 + 2 * 100 * 100 * 10

    def test_small_grid_clean(self):
        assert lemma_audit(20, 20, 4).ok

    def test_rejects_tiny_grid(self):
        with pytest.raises(InvalidArgumentError):
            lemma_audit(1, 1, 1)
