import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shadowrate.errors import DegenerateVolatilitySpread
from shadowrate.market import (DualAssetParams, OptionSpec, SingleAssetParams, market_price_of_risk,
                               q_dynamics, shadow_rate, sharpe_consistency_check, sigma_spread_ok)
from shadowrate.schedule import Schedule

vols = st.floats(0.05, 0.8)
rates = st.floats(-0.05, 0.15)


def test_shadow_rate_formula(pair_params):
    # (0.08*0.4 - 0.14*0.2) / 0.2
    assert shadow_rate(pair_params) == pytest.approx(0.02, abs=1e-15)


def test_market_price_of_risk(pair_params):
    # dmu/dsigma - sigma = 0.3 - 0.2
    assert market_price_of_risk(pair_params) == pytest.approx(0.1, abs=1e-15)


def test_equal_vols_rejected():
    p = DualAssetParams(0.1, 0.2, 0.1, 0.2)
    with pytest.raises(DegenerateVolatilitySpread):
        shadow_rate(p)
    with pytest.raises(DegenerateVolatilitySpread):
        market_price_of_risk(p)
    assert not sigma_spread_ok(p)


def test_spread_epsilon_is_configurable():
    p = DualAssetParams(0.1, 0.2, 0.1, 0.2 + 1e-8, spread_eps=1e-6)
    with pytest.raises(DegenerateVolatilitySpread):
        shadow_rate(p)


def test_q_drifts(pair_params):
    qd = q_dynamics(pair_params)
    assert qd.drift_S == pytest.approx(0.02 + 0.04)
    assert qd.drift_Z == pytest.approx(0.02 + 0.08)
    assert qd.drift_Zhat == 0.0


@given(r=rates, s=vols, st_=vols, mu=st.floats(-0.1, 0.3))
def test_shadow_rate_recovers_construction(r, s, st_, mu):
    if abs(st_ - s) < 0.01:
        return
    p = DualAssetParams.from_shadow_rate(r, s, st_, mu)
    assert shadow_rate(p) == pytest.approx(r, abs=1e-12)


@given(r=rates, s=vols, st_=vols, mu=st.floats(-0.1, 0.3))
def test_sharpe_ratios_agree_under_both_measures(r, s, st_, mu):
    if abs(st_ - s) < 0.01:
        return
    rep = sharpe_consistency_check(DualAssetParams.from_shadow_rate(r, s, st_, mu))
    assert rep.consistent
    assert rep.sharpe_S_Q == pytest.approx(rep.sharpe_Z_Q, abs=1e-10)
    assert rep.r_Q == pytest.approx(rep.r_bar, abs=1e-12)


@given(mu=st.floats(-0.1, 0.3), s=vols, mut=st.floats(-0.1, 0.3), st_=vols)
def test_swap_symmetry(mu, s, mut, st_):
    if abs(st_ - s) < 0.01:
        return
    p = DualAssetParams(mu, s, mut, st_)
    assert shadow_rate(p.swapped()) == pytest.approx(shadow_rate(p), abs=1e-12)


def test_negative_sigma_tilde_allowed():
    p = DualAssetParams(0.1, 0.2, 0.0, -0.2)
    assert math.isfinite(shadow_rate(p))


def test_nonpositive_sigma_rejected():
    with pytest.raises(ValueError):
        DualAssetParams(0.1, 0.0, 0.1, 0.2)
    with pytest.raises(ValueError):
        SingleAssetParams(0.1, -0.1, 0.05)


def test_json_round_trip_with_schedule():
    doc = {"mu": 0.1, "sigma": [{"t_start": 0, "value": 0.2}, {"t_start": 0.5, "value": 0.3}],
           "mu_tilde": 0.05, "sigma_tilde": 0.4}
    p = DualAssetParams.from_json(doc)
    assert isinstance(p.sigma, Schedule)
    assert p.at(0.25)[1] == 0.2 and p.at(0.75)[1] == 0.3
    assert DualAssetParams.from_json(p.to_json()) == p


def test_time_varying_shadow_rate():
    p = DualAssetParams(0.1, Schedule((0, 1), (0.2, 0.3)), 0.1, 0.4)
    assert shadow_rate(p, 0.5) == pytest.approx(0.1)
    assert shadow_rate(p, 1.5) == pytest.approx(0.1)


class TestOptionSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            OptionSpec(-1, 1)
        with pytest.raises(ValueError):
            OptionSpec(100, 0)
        with pytest.raises(ValueError):
            OptionSpec(100, 1, eta=1.5)
        with pytest.raises(ValueError):
            OptionSpec(100, 1, payoff="put")
        with pytest.raises(ValueError):
            OptionSpec(100, 1, payoff="custom")

    def test_payoffs(self):
        s, z = np.array([90.0, 110.0]), np.array([130.0, 70.0])
        spec = OptionSpec(100, 1, 0.5)
        np.testing.assert_allclose(spec.payoff_two_asset(s, z), [10.0, 0.0])
        single = OptionSpec(100, 1, 0.5, "call-on-single")
        np.testing.assert_allclose(single.payoff_two_asset(s, z), [0.0, 10.0])
        custom = OptionSpec(100, 1, 0.5, "custom", g=lambda x: x * 2)
        np.testing.assert_allclose(custom.payoff_two_asset(s, z), [220.0, 180.0])
        np.testing.assert_allclose(custom.payoff_single(s), [180.0, 220.0])

    def test_zero_strike_allowed(self):
        assert OptionSpec(0.0, 1.0).strike == 0.0
