import math

import numpy as np
import pytest

from shadowrate.closed_form import LrClosedFormInputs, black_scholes_call, lr_call_price, lr_call_price_quadrature
from shadowrate.errors import DegenerateVolatilitySpread, ZeroDrift
from shadowrate.market import DualAssetParams, OptionSpec, SingleAssetParams
from shadowrate.monte_carlo import (SUB_BATCH, batch_normals, compare_bsm_vs_pi, lr_terminal_log_moments,
                                    martingale_check, mc_price_deflated_numeraire, mc_price_lr, mc_price_pi,
                                    normals, ratio_batch, rate_integral, simulate_numeraire_pair,
                                    simulate_p_single, simulate_q_pair)
from shadowrate.schedule import Schedule

N = 200_000


class TestRandomNumbers:
    def test_reproducible(self):
        np.testing.assert_array_equal(normals(5, 1000, 3), normals(5, 1000, 3))
        assert not np.array_equal(normals(5, 10, 1), normals(6, 10, 1))

    def test_sub_batches_use_disjoint_streams(self):
        z = normals(1, SUB_BATCH + 10, 1)
        np.testing.assert_array_equal(z[SUB_BATCH:], batch_normals(1, 1, 10, 1))
        assert not np.array_equal(z[:10], z[SUB_BATCH:])

    def test_moments(self):
        z = normals(3, 400_000, 1).ravel()
        assert abs(z.mean()) < 3 / math.sqrt(z.size)
        assert abs(z.var() - 1) < 4 * math.sqrt(2 / z.size)
        assert np.all(np.isfinite(z))

    def test_worker_count_does_not_change_result(self, pair_params, portfolio_spec):
        a = mc_price_lr(100, 100, pair_params, portfolio_spec, 150_000, 9)
        b = mc_price_lr(100, 100, pair_params, portfolio_spec, 150_000, 9, workers=3)
        assert a == b

    def test_estimate_standard_error(self):
        v = np.array([1.0, 2.0, 3.0, 4.0])
        est, _ = martingale_check(v, 2.5)
        assert est.std_error == pytest.approx(np.std(v, ddof=1) / 2)


class TestQPair:
    def test_shared_driver_and_positivity(self, pair_params):
        S, Z = simulate_q_pair(100, 80, pair_params, 1.0, 4, 1000, 3)
        assert np.all(S.paths > 0) and np.all(Z.paths > 0)
        dls = np.diff(np.log(S.paths), axis=1)
        dlz = np.diff(np.log(Z.paths), axis=1)
        assert np.corrcoef(dls[:, 0], dlz[:, 0])[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_bit_identical(self, pair_params):
        a = simulate_q_pair(100, 80, pair_params, 1.0, 3, 500, 11)[0].paths
        b = simulate_q_pair(100, 80, pair_params, 1.0, 3, 500, 11)[0].paths
        assert a.tobytes() == b.tobytes()

    def test_log_moments_and_ratio_martingale(self, pair_params):
        S, Z = simulate_q_pair(100, 80, pair_params, 2.0, 1, N, 21)
        mom = lr_terminal_log_moments(100, 80, pair_params, 2.0)
        _, ok = martingale_check(np.log(S.terminal), mom["mean_log_S"])
        assert ok
        _, ok = martingale_check(np.log(Z.terminal), mom["mean_log_Z"])
        assert ok
        _, ok = martingale_check(ratio_batch(S, Z).terminal, 0.8)
        assert ok

    def test_schedule_breakpoints_refine_grid(self):
        p = DualAssetParams(0.08, Schedule((0.0, 0.3), (0.2, 0.25)), 0.14, 0.4)
        S, _ = simulate_q_pair(100, 100, p, 1.0, 2, 10, 1)
        np.testing.assert_allclose(S.times, [0.0, 0.3, 0.5, 1.0])

    def test_equal_vols_rejected(self):
        with pytest.raises(DegenerateVolatilitySpread):
            simulate_q_pair(100, 100, DualAssetParams(0.1, 0.2, 0.1, 0.2), 1.0, 1, 10, 1)

    def test_euler_diagnostic_is_unbiased_in_mean(self, pair_params):
        S, Z = simulate_q_pair(100, 100, pair_params, 1.0, 50, 20_000, 4, scheme="euler")
        _, ok = martingale_check(Z.terminal / S.terminal, 1.0, n_se=4)
        assert ok and S.scheme == "euler"


class TestLrPricing:
    def test_matches_closed_form(self, pair_params, portfolio_spec):
        est = mc_price_lr(100, 100, pair_params, portfolio_spec, N, 42)
        assert est.within(lr_call_price(LrClosedFormInputs(100, 100, pair_params, portfolio_spec)))

    def test_eta_one_matches_black_scholes(self):
        params = DualAssetParams.from_shadow_rate(0.05, 0.2, 0.4, 0.1)
        assert mc_price_lr(100, 100, params, OptionSpec(100, 1.0), N, 1).within(
            black_scholes_call(100, 100, 0.05, 0.2, 1.0))

    def test_zero_strike(self, pair_params):
        spec = OptionSpec(0.0, 1.0, 0.3)
        est = mc_price_lr(100, 90, pair_params, spec, N, 2)
        quad = lr_call_price_quadrature(LrClosedFormInputs(100, 90, pair_params, spec))
        assert quad == pytest.approx(0.3 * 100 + 0.7 * 90, rel=1e-12)
        assert est.within(quad)

    def test_time_varying_coefficients(self):
        # eta = 1: Black-Scholes with averaged rate and variance
        sig = Schedule((0.0, 0.5), (0.2, 0.3))
        sig_t = Schedule((0.0, 0.5), (0.4, 0.5))
        mu = 0.06
        mu_t = Schedule((0.0, 0.5), (0.04 + (mu - 0.04) * 2, 0.02 + (mu - 0.02) * 0.5 / 0.3))
        params = DualAssetParams(mu, sig, mu_t, sig_t)
        r_avg = 0.5 * 0.04 + 0.5 * 0.02
        vol = math.sqrt(0.5 * 0.04 + 0.5 * 0.09)
        est = mc_price_lr(100, 100, params, OptionSpec(100, 1.0), N, 8)
        assert est.within(black_scholes_call(100, 100, r_avg, vol, 1.0))

    def test_antithetic_does_not_increase_variance(self, pair_params, portfolio_spec):
        plain = mc_price_lr(100, 100, pair_params, portfolio_spec, N, 3)
        anti = mc_price_lr(100, 100, pair_params, portfolio_spec, N, 3, antithetic=True)
        assert anti.std_error <= plain.std_error
        assert anti.n_paths == N


class TestSingleAsset:
    def test_plain_log_moments(self, single_params):
        b = simulate_p_single(100, single_params, 2.0, 1, N, 5)
        _, ok = martingale_check(np.log(b.terminal), math.log(100) + (0.1 - 0.02) * 2.0)
        assert ok and b.measure == "P" and b.process_tag == "S"

    def test_deflated_discounted_is_martingale(self, single_params):
        b = simulate_p_single(100, single_params, 1.0, 4, N, 6, deflated=True)
        _, ok = martingale_check(b.terminal * math.exp(-0.05), 100.0)
        assert ok

    def test_identity_deflator(self):
        params = SingleAssetParams(0.05, 0.2, 0.05)
        a = simulate_p_single(100, params, 1.0, 3, 100, 7)
        b = simulate_p_single(100, params, 1.0, 3, 100, 7, deflated=True)
        np.testing.assert_allclose(a.paths, b.paths, rtol=1e-15)

    def test_zero_drift_rejected(self):
        with pytest.raises(ZeroDrift):
            simulate_p_single(100, SingleAssetParams(0.0, 0.2, 0.05), 1.0, 1, 10, 1, deflated=True)

    def test_pi_price_matches_sigma_R_formula(self, single_params, single_call):
        assert mc_price_pi(100, single_params, single_call, N, 10).within(
            black_scholes_call(100, 100, 0.05, 0.1, 1.0))

    def test_constant_payoff_has_zero_variance(self, single_params):
        spec = OptionSpec(100, 2.0, payoff="custom", g=lambda x: np.full_like(x, 7.0))
        est = mc_price_pi(100, single_params, spec, 1000, 1)
        assert est.value == pytest.approx(7.0 * math.exp(-0.1), rel=1e-14)
        assert est.std_error == pytest.approx(0.0, abs=1e-14)

    def test_large_drift_tends_to_deterministic_payoff(self, single_call):
        est = mc_price_pi(100, SingleAssetParams(50.0, 0.2, 0.05), single_call, 20_000, 2)
        target = math.exp(-0.05) * max(0.0, 100 * math.exp(0.05) - 100)
        assert est.value == pytest.approx(target, abs=0.02)

    def test_rate_integral_for_schedules(self):
        p = SingleAssetParams(0.1, 0.2, Schedule((0.0, 1.0), (0.01, 0.03)))
        assert rate_integral(p, 0.5, 2.0) == pytest.approx(0.005 + 0.03)


class TestDeflatedNumeraire:
    def test_ratio_is_martingale(self, single_params):
        S, Spi = simulate_numeraire_pair(100, single_params, 1.0, 2, N, 12)
        _, ok = martingale_check(S.terminal / Spi.terminal, 1.0)
        assert ok

    def test_forward_payoff(self, single_params):
        spec = OptionSpec(0.0, 1.0, payoff="custom", g=lambda x: x)
        # E[exp(a W - a^2/2)] = 1 makes the bookkeeping factor exactly one
        assert mc_price_deflated_numeraire(100, single_params, spec, N, 13).within(100.0)

    def test_call_matches_zero_rate_formula(self, single_params, single_call):
        # the density exp(-sigma_R W - sigma_R^2 t/2) shifts W by -sigma_R t, leaving S driftless
        est = mc_price_deflated_numeraire(100, single_params, single_call, N, 14)
        assert est.within(black_scholes_call(100, 100, 0.0, 0.2, 1.0))

    def test_degenerate_pair_rejected(self, single_call):
        with pytest.raises(DegenerateVolatilitySpread):
            mc_price_deflated_numeraire(100, SingleAssetParams(0.05, 0.2, 0.05), single_call, 100, 1)


def test_compare_bsm_vs_pi(single_params, single_call):
    rep = compare_bsm_vs_pi(100, single_params, single_call)
    assert rep.sigma == 0.2 and rep.sigma_R == pytest.approx(0.1)
    assert rep.price_bsm == pytest.approx(black_scholes_call(100, 100, 0.05, 0.2, 1.0))
    assert rep.price_pi == pytest.approx(black_scholes_call(100, 100, 0.05, 0.1, 1.0))
    same = compare_bsm_vs_pi(100, SingleAssetParams(0.05, 0.2, 0.05), single_call)
    assert same.difference == 0.0
