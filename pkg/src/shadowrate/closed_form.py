"""Closed-form and quadrature prices for a call on a two-stock portfolio.

With constant coefficients both terminal prices are log-normal functions of one
standard normal ``y``.  The payoff is positive exactly for ``y > y*`` where
``y*`` solves the strike equation

    eta*S*exp(m + w**2/2 + w*y) + (1-eta)*Z*exp(m + w*w~ - w~**2/2 + w~*y) = K

with ``m = r_bar*tau``, ``w = sigma*sqrt(tau)``, ``w~ = sigma~*sqrt(tau)``.
The price is then

    C = eta*S*Phi(d) + (1-eta)*Z*Phi(d - dw) - K*exp(-m)*Phi(d - w),  d = -y*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate, special

from .errors import NoRoot, NonMonotoneRoot, QuadratureBudgetExceeded, ToleranceNotMet
from .market import DualAssetParams, OptionSpec, shadow_rate
from .schedule import is_constant

ROOT_TOL = 1e-13
GAUSS_TAIL = 12.0

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def normal_cdf(x):
    return special.ndtr(x)


def normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


def normal_quantile(u):
    return special.ndtri(u)


def black_scholes_call(S: float, K: float, r: float, sigma: float, tau: float) -> float:
    """Classical call price; used as an independent reference throughout."""
    if tau <= 0:
        return max(S - K, 0.0)
    if K <= 0:
        return S
    vol = sigma * math.sqrt(tau)
    d1 = (math.log(S / K) + (r + 0.5 * sigma * sigma) * tau) / vol
    return S * normal_cdf(d1) - K * math.exp(-r * tau) * normal_cdf(d1 - vol)


@dataclass(frozen=True)
class LrClosedFormInputs:
    S: float
    Z: float
    params: DualAssetParams
    spec: OptionSpec
    t: float = 0.0

    def __post_init__(self) -> None:
        if self.S <= 0 or self.Z <= 0:
            raise ValueError("spot prices must be positive")
        if self.t >= self.spec.maturity:
            raise ValueError("valuation time must precede maturity")
        if not is_constant(self.params.mu, self.params.sigma,
                           self.params.mu_tilde, self.params.sigma_tilde):
            raise ValueError("closed form requires constant coefficients")

    @property
    def tau(self) -> float:
        return self.spec.maturity - self.t

    @cached_property
    def r_bar(self) -> float:
        return shadow_rate(self.params, self.t)

    @property
    def m(self) -> float:
        return self.r_bar * self.tau

    @property
    def w(self) -> float:
        return self.params.at(self.t)[1] * math.sqrt(self.tau)

    @property
    def w_tilde(self) -> float:
        return self.params.at(self.t)[3] * math.sqrt(self.tau)

    @property
    def dw(self) -> float:
        return self.w - self.w_tilde

    def log_coefficients(self) -> tuple[float, float]:
        """Log of the two exponential prefactors in the strike equation (``-inf`` if absent)."""
        eta, m, w, wt = self.spec.eta, self.m, self.w, self.w_tilde
        la = math.log(eta * self.S) + m + 0.5 * w * w if eta > 0 else -math.inf
        lb = math.log((1 - eta) * self.Z) + m + w * wt - 0.5 * wt * wt if eta < 1 else -math.inf
        return la, lb


@dataclass(frozen=True)
class RootResult:
    y_star: float
    iterations: int
    residual: float

    @property
    def d(self) -> float:
        return -self.y_star


def _log_lhs(y: float, la: float, lb: float, w: float, wt: float) -> tuple[float, float]:
    """log of the strike-equation left side and its derivative in ``y``."""
    a = la + w * y
    b = lb + wt * y
    hi = max(a, b)
    ea = math.exp(a - hi)
    eb = math.exp(b - hi)
    return hi + math.log(ea + eb), (w * ea + wt * eb) / (ea + eb)


def solve_y_star(inp: LrClosedFormInputs, tol: float = ROOT_TOL, max_iter: int = 200) -> RootResult:
    """Root of the strike equation: bisection to bracket, Newton to polish.

    Works on the log of the left side, which is convex and increasing, so the
    Newton phase converges from either side once a bracket is held.
    """
    eta, K = inp.spec.eta, inp.spec.strike
    w, wt = inp.w, inp.w_tilde
    if K <= 0:
        raise NoRoot("strike must be positive for a finite y*")
    if w == 0 and wt == 0:
        raise NoRoot("zero time to maturity: strike equation is constant in y")
    if eta < 1 and wt <= 0:
        raise NonMonotoneRoot(
            "Z loading sigma_tilde <= 0 makes the strike equation non-monotone; "
            "price this payoff by quadrature or Monte Carlo")
    la, lb = inp.log_coefficients()
    log_k = math.log(K)

    def h(y):
        v, dv = _log_lhs(y, la, lb, w, wt)
        return v - log_k, dv

    lo, hi = -50.0, 50.0
    while h(lo)[0] > 0:
        lo *= 2.0
        if lo < -1e6:
            raise NoRoot("could not bracket y* from below")
    while h(hi)[0] < 0:
        hi *= 2.0
        if hi > 1e6:
            raise NoRoot("could not bracket y* from above")

    it = 0
    while hi - lo > 1.0:
        mid = 0.5 * (lo + hi)
        if h(mid)[0] > 0:
            hi = mid
        else:
            lo = mid
        it += 1

    y = hi
    for _ in range(max_iter):
        it += 1
        f, df = h(y)
        if f > 0:
            hi = min(hi, y)
        else:
            lo = max(lo, y)
        step = f / df
        y_new = y - step
        if not lo <= y_new <= hi:
            y_new = 0.5 * (lo + hi)
        if abs(y_new - y) <= tol * max(1.0, abs(y)):
            y = y_new
            break
        y = y_new
    else:
        raise ToleranceNotMet(f"y* not converged after {max_iter} Newton steps")

    residual = math.expm1(h(y)[0])
    return RootResult(y, it, residual)


def lr_call_price(inp: LrClosedFormInputs, root: RootResult | None = None) -> float:
    eta, K = inp.spec.eta, inp.spec.strike
    root = solve_y_star(inp) if root is None else root
    d = root.d
    price = (eta * inp.S * normal_cdf(d)
             + (1 - eta) * inp.Z * normal_cdf(d - inp.dw)
             - K * math.exp(-inp.m) * normal_cdf(d - inp.w))
    return max(float(price), 0.0)


def price_integrand(y, inp: LrClosedFormInputs):
    """Integrand of the one-dimensional price integral, including the Gaussian weight."""
    eta, K = inp.spec.eta, inp.spec.strike
    dw, w, m = inp.dw, inp.w, inp.m
    bracket = (eta * inp.S
               + (1 - eta) * inp.Z * np.exp(-0.5 * dw * dw - dw * y)
               - K * np.exp(-m - 0.5 * w * w - w * y))
    return bracket * normal_pdf(y)


def _quad_limits(inp: LrClosedFormInputs) -> tuple[float, float]:
    # each term is a Gaussian centred at 0, -dw or -w
    centres = (0.0, -inp.dw, -inp.w)
    return min(centres) - GAUSS_TAIL, max(centres) + GAUSS_TAIL


def lr_call_price_quadrature(inp: LrClosedFormInputs, epsabs: float = 1e-12,
                             limit: int = 200) -> float:
    """Adaptive quadrature of the price integral from ``y*`` upward.

    Independent of the closed form except for sharing ``y*``.  A zero strike
    integrates over the whole real line.
    """
    lower, upper = _quad_limits(inp)
    if inp.spec.strike > 0:
        y_star = solve_y_star(inp).y_star
        lower = max(lower, y_star)
    if lower >= upper:
        return 0.0
    # split at the Gaussian centres so the adaptive rule sees each bump
    cuts = sorted({lower, upper, *(c for c in (0.0, -inp.dw, -inp.w) if lower < c < upper)})
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        val, err, *info = integrate.quad(price_integrand, a, b, args=(inp,), epsabs=epsabs,
                                         epsrel=1e-13, limit=limit, full_output=1)
        if len(info) > 1 and err > 10 * epsabs * max(1.0, abs(val)):
            raise QuadratureBudgetExceeded(f"quadrature error estimate {err:.3g} on [{a}, {b}]")
        total += val
    return total


@dataclass(frozen=True)
class LognormalTerminal:
    mean_log_S: float
    sd_log_S: float
    mean_log_Z: float
    sd_log_Z: float


def lognormal_terminal_params(inp: LrClosedFormInputs, r_bar: float | None = None) -> LognormalTerminal:
    """Mean and standard deviation of ``ln S_T`` and ``ln Z_T`` under the stock-numeraire measure.

    ``r_bar`` may be passed explicitly when the two volatilities coincide and the
    shadow rate is therefore undefined.
    """
    tau = inp.tau
    _, sigma, _, sigma_t = inp.params.at(inp.t)
    r = inp.r_bar if r_bar is None else r_bar
    m = r * tau
    w = sigma * math.sqrt(tau)
    wt = sigma_t * math.sqrt(tau)
    return LognormalTerminal(math.log(inp.S) + m + 0.5 * w * w, w,
                             math.log(inp.Z) + m + w * wt - 0.5 * wt * wt, abs(wt))
