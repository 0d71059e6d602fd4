import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shadowrate.companion import (PerpetualSpec, delta_exponent, deflator_pi, log_return_correlation,
                                  named_gammas, perpetual_dynamics, perpetual_pair, perpetual_pde_residual,
                                  perpetual_price, s_minus_delta_dynamics, sigma_R, xi, xi_curve, xi_maximum)
from shadowrate.errors import RequiresZeroH0, UnboundedDeflator, ZeroDrift
from shadowrate.market import SingleAssetParams, shadow_rate
from shadowrate.schedule import Schedule

DAILY = SingleAssetParams(4.38e-4, 1.935e-2, 1.635e-4)


def spec(gamma, r=0.05, s=0.2, mu=0.1, h0=0.0):
    return PerpetualSpec(gamma, r, s, mu, h0)


class TestPrice:
    def test_gamma_one_is_stock(self):
        assert perpetual_price(spec(1.0), 3.0, 123.0) == pytest.approx(123.0, rel=1e-15)

    def test_gamma_zero_is_bank_account(self):
        assert perpetual_price(spec(0.0), 2.0, 50.0) == pytest.approx(math.exp(0.1), rel=1e-15)

    def test_minus_delta_has_no_time_factor(self):
        d = delta_exponent(0.05, 0.2)
        assert perpetual_price(spec(-d), 5.0, 2.0) == pytest.approx(2.0 ** -d, rel=1e-14)
        sp = PerpetualSpec.from_single(DAILY, -DAILY_DELTA())
        assert perpetual_price(sp, 0.0, 1.0) == 1.0

    def test_constant_coefficients_match_xi_form(self):
        g = 0.37
        d = delta_exponent(0.05, 0.2)
        expect = 80 ** g * math.exp(float(xi(g, d)) * 0.04 * 1.5 / 2)
        assert perpetual_price(spec(g), 1.5, 80.0) == pytest.approx(expect, rel=1e-14)

    def test_schedule_integrates_piecewise(self):
        sp = PerpetualSpec(0.5, Schedule((0, 1), (0.02, 0.06)), Schedule((0, 1), (0.2, 0.3)), 0.1)
        eta1 = 0.5 * (0.02 + 0.04 * 0.25)
        eta2 = 0.5 * (0.06 + 0.09 * 0.25)
        assert perpetual_price(sp, 2.0, 4.0) == pytest.approx(2.0 * math.exp(eta1 + eta2), rel=1e-14)

    def test_nonzero_h0_adds_bank_account(self):
        assert perpetual_price(spec(1.0, h0=3.0), 1.0, 10.0) == pytest.approx(10.0 + 3.0 * math.exp(0.05))
        with pytest.raises(RequiresZeroH0):
            perpetual_dynamics(spec(1.0, h0=3.0))

    def test_vectorised(self):
        out = perpetual_price(spec(2.0), 0.0, np.array([1.0, 2.0]))
        np.testing.assert_allclose(out, [1.0, 4.0])


def DAILY_DELTA():
    return delta_exponent(1.635e-4, 1.935e-2)


class TestXi:
    def test_endpoints(self):
        assert float(xi(0.0, 0.7)) == 0.7 and float(xi(1.0, 0.7)) == 0.0

    @given(st.floats(0.01, 5.0))
    def test_named_points(self, d):
        g = named_gammas(d)
        assert float(xi(g["A"], d)) == pytest.approx(g["A"], abs=1e-12)
        assert float(xi(g["F"], d)) == pytest.approx(g["F"], abs=1e-12)
        assert float(xi(g["B"], d)) == pytest.approx(0.0, abs=1e-12)
        assert float(xi(g["G"], d)) == 0.0
        assert float(xi(g["C"], d)) == pytest.approx(d, abs=1e-12)
        assert float(xi(g["E"], d)) == pytest.approx(d, abs=1e-12)
        assert float(xi(g["D"], d)) == pytest.approx((1 + d) ** 2 / 4, abs=1e-12)

    @given(st.floats(0.01, 5.0), st.floats(-5, 5), st.floats(-5, 5))
    def test_concave_with_peak_at_D(self, d, a, b):
        gm, xm = xi_maximum(d)
        assert float(xi(a, d)) <= xm + 1e-12
        mid = 0.5 * (a + b)
        assert float(xi(mid, d)) >= 0.5 * (float(xi(a, d)) + float(xi(b, d))) - 1e-9

    def test_peak_for_reference_delta(self):
        gm, xm = xi_maximum(0.87332)
        assert gm == pytest.approx(0.06334, abs=1e-12)
        assert xm == pytest.approx(1.87332 ** 2 / 4, abs=1e-15)
        assert round(xm, 5) == 0.87733

    def test_curve_is_sorted_and_labelled(self):
        pts = xi_curve(0.87332, np.linspace(-2, 1.5, 8))
        assert [p.gamma for p in pts] == sorted(p.gamma for p in pts)
        labels = [p.label for p in pts if p.label]
        assert labels == list("ABCDEFG")
        for p in pts:
            assert p.xi == pytest.approx(float(xi(p.gamma, 0.87332)), abs=1e-15)

    def test_grid_point_on_label_not_duplicated(self):
        pts = xi_curve(0.5, [0.0, 1.0, 0.3])
        assert len(pts) == 8

    def test_delta_must_be_positive(self):
        with pytest.raises(ValueError):
            xi_curve(0.0, [0.0])


class TestDynamics:
    def test_reference_daily_values(self):
        d = DAILY_DELTA()
        mu_t, sig_t = perpetual_dynamics(PerpetualSpec.from_single(DAILY, -d))
        assert mu_t == pytest.approx(-7.62e-5, abs=5e-8)
        assert (mu_t, sig_t) == pytest.approx(s_minus_delta_dynamics(DAILY), abs=1e-18)

    def test_special_exponents(self):
        assert perpetual_dynamics(spec(1.0)) == pytest.approx((0.1, 0.2))
        assert perpetual_dynamics(spec(0.0)) == pytest.approx((0.05, 0.0))

    def test_minus_delta_with_mu_equal_rate(self):
        drift, vol = s_minus_delta_dynamics(SingleAssetParams(0.05, 0.2, 0.05))
        assert drift == pytest.approx(0.05, abs=1e-15)
        assert vol == pytest.approx(-delta_exponent(0.05, 0.2) * 0.2)

    @settings(max_examples=60)
    @given(st.floats(-3, 3), st.floats(0.0, 0.1), st.floats(0.05, 0.8), st.floats(-0.2, 0.4))
    def test_pair_shadow_rate_is_riskless_rate(self, g, r, s, mu):
        if abs(g - 1) < 1e-3:
            return
        pair = perpetual_pair(PerpetualSpec(g, r, s, mu))
        assert shadow_rate(pair) == pytest.approx(r, abs=1e-12)

    @settings(max_examples=60)
    @given(st.floats(-3, 3), st.floats(0.001, 0.1), st.floats(0.05, 0.8), st.floats(0, 5), st.floats(0.1, 10))
    def test_pde_residual_vanishes(self, g, r, s, t, S):
        sp = PerpetualSpec(g, r, s, 0.1)
        res = perpetual_pde_residual(sp, t, S)
        assert abs(res) <= 1e-10 * abs(perpetual_price(sp, t, S))

    def test_pde_residual_requires_constants(self):
        sp = PerpetualSpec(0.5, Schedule((0, 1), (0.01, 0.02)), 0.2, 0.1)
        with pytest.raises(ValueError):
            perpetual_pde_residual(sp, 0.5, 1.0)


class TestDeflator:
    def test_values(self):
        assert deflator_pi(SingleAssetParams(0.10, 0.2, 0.05)) == 0.5
        assert deflator_pi(SingleAssetParams(0.05, 0.2, 0.05)) == 1.0
        assert sigma_R(SingleAssetParams(0.10, 0.2, 0.05)) == pytest.approx(0.1)

    def test_zero_drift(self):
        with pytest.raises(ZeroDrift):
            deflator_pi(SingleAssetParams(0.0, 0.2, 0.05))

    def test_drift_vanishing_along_schedule(self):
        p = SingleAssetParams(Schedule((0, 1, 2), (0.1, 1e-3, 0.0)), 0.2, 0.05)
        with pytest.raises(UnboundedDeflator):
            deflator_pi(p, 0.5)

    def test_drift_near_zero_exceeds_bound(self):
        p = SingleAssetParams(Schedule((0, 1), (0.1, 1e-12)), 0.2, 0.05)
        with pytest.raises(UnboundedDeflator):
            deflator_pi(p, 0.5)


def test_log_return_correlation_of_opposite_loadings():
    rng = np.random.default_rng(0)
    s = np.exp(np.cumsum(rng.standard_normal(100) * 0.02))
    assert log_return_correlation(s, s ** -0.8) == pytest.approx(-1.0, abs=1e-12)
