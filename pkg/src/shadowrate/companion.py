"""Companion assets built from a single stock.

Two constructions live here:

* the perpetual derivative ``g(t, S) = S**gamma * exp(int_0^t eta(u) du)`` with
  ``eta = (1 - gamma) * (r_f + sigma**2 * gamma / 2)``.  For constant
  coefficients the exponent is ``xi(gamma) * sigma**2 * t / 2`` with
  ``xi(gamma) = (1 - gamma) * (delta + gamma)`` and ``delta = 2 r_f / sigma**2``.
* the cumulative-return deflator ``pi = r_f / mu`` which turns the stock's
  instantaneous return into one whose drift is the riskless rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import RequiresZeroH0, UnboundedDeflator, ZeroDrift
from .market import DualAssetParams, SingleAssetParams
from .schedule import Param, as_param, is_constant, segment_values, segments, value_at

NAMED_POINTS = "ABCDEFG"
LABEL_TOL = 1e-12
# sup(pi + 1/pi) above this is treated as unbounded
DEFLATOR_BOUND = 1e8


def delta_exponent(r_f: float, sigma: float) -> float:
    """Characteristic exponent ``2 r_f / sigma**2`` (positive for a positive rate)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return 2.0 * r_f / (sigma * sigma)


def xi(gamma, delta):
    return (1.0 - np.asarray(gamma, dtype=float)) * (delta + np.asarray(gamma, dtype=float))


@dataclass(frozen=True)
class PerpetualSpec:
    gamma: float
    r_f: Param
    sigma: Param
    mu: Param
    h0: float = 0.0

    def __post_init__(self) -> None:
        for name in ("r_f", "sigma", "mu"):
            object.__setattr__(self, name, as_param(getattr(self, name)))
        if min(segment_values(self.sigma)) <= 0:
            raise ValueError("sigma must be positive")

    @classmethod
    def from_single(cls, params: SingleAssetParams, gamma: float, h0: float = 0.0) -> "PerpetualSpec":
        return cls(gamma, params.r_f, params.sigma, params.mu, h0)

    def single(self) -> SingleAssetParams:
        return SingleAssetParams(self.mu, self.sigma, self.r_f)

    def delta(self, t: float = 0.0) -> float:
        return delta_exponent(value_at(self.r_f, t), value_at(self.sigma, t))


def growth_exponent(spec: PerpetualSpec, t: float) -> float:
    """``int_0^t eta(u) du``, exact over piecewise-constant segments."""
    g = spec.gamma
    total = 0.0
    for t0, t1, (r, s) in segments(0.0, t, spec.r_f, spec.sigma):
        total += (t1 - t0) * (1.0 - g) * (r + 0.5 * s * s * g)
    return total


def perpetual_price(spec: PerpetualSpec, t: float, S_t):
    """Price of the perpetual derivative at time ``t`` given the stock price."""
    S_t = np.asarray(S_t, dtype=float)
    if np.any(S_t <= 0):
        raise ValueError("stock price must be positive")
    price = S_t ** spec.gamma * math.exp(growth_exponent(spec, t))
    if spec.h0:
        r_int = sum((t1 - t0) * r for t0, t1, (r,) in segments(0.0, t, spec.r_f))
        price = price + spec.h0 * math.exp(r_int)
    return price if price.ndim else float(price)


@dataclass(frozen=True)
class XiPoint:
    gamma: float
    xi: float
    label: str | None = None


def named_gammas(delta: float) -> dict[str, float]:
    """Exponents of the labelled solutions.

    A, F: fixed points ``xi(g) = g``; B, G: roots of ``xi``; C, E: ``xi = delta``;
    D: the maximum of ``xi``.
    """
    root = math.sqrt(delta * delta + 4.0 * delta)
    return {
        "A": 0.5 * (-delta - root),
        "B": -delta,
        "C": 0.0,
        "D": 0.5 * (1.0 - delta),
        "E": 1.0 - delta,
        "F": 0.5 * (-delta + root),
        "G": 1.0,
    }


def xi_curve(delta: float, gamma_grid: Iterable[float]) -> list[XiPoint]:
    """``xi`` on a grid, merged with the labelled points and sorted by ``gamma``.

    A grid value within ``LABEL_TOL`` of a labelled exponent is replaced by the
    labelled point rather than duplicated.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    named = named_gammas(delta)
    points = [XiPoint(g, float(xi(g, delta)), lab) for lab, g in named.items()]
    for g in gamma_grid:
        g = float(g)
        if any(abs(g - ng) <= LABEL_TOL for ng in named.values()):
            continue
        points.append(XiPoint(g, float(xi(g, delta))))
    points.sort(key=lambda p: (p.gamma, p.label or ""))
    return points


def xi_maximum(delta: float) -> tuple[float, float]:
    return 0.5 * (1.0 - delta), 0.25 * (1.0 + delta) ** 2


def perpetual_dynamics(spec: PerpetualSpec, t: float = 0.0) -> tuple[float, float]:
    """Drift and signed volatility of the perpetual derivative (``h0 = 0`` only)."""
    if spec.h0 != 0:
        raise RequiresZeroH0("derivative dynamics are log-normal only when h0 == 0")
    g = spec.gamma
    r, s, m = (value_at(p, t) for p in (spec.r_f, spec.sigma, spec.mu))
    return (1.0 - g) * r + g * m, g * s


def perpetual_pair(spec: PerpetualSpec) -> DualAssetParams:
    """Stock plus perpetual derivative as a two-asset market (constant coefficients)."""
    if not is_constant(spec.r_f, spec.sigma, spec.mu):
        raise ValueError("perpetual pair requires constant coefficients")
    mu_t, sigma_t = perpetual_dynamics(spec)
    return DualAssetParams(spec.mu, spec.sigma, mu_t, sigma_t)


def s_minus_delta_dynamics(params: SingleAssetParams, t: float = 0.0) -> tuple[float, float]:
    """Drift and signed volatility of ``S**(-delta)``."""
    mu, sigma, r = params.at(t)
    d = delta_exponent(r, sigma)
    return (1.0 + d) * r - d * mu, -d * sigma


def perpetual_pde_residual(spec: PerpetualSpec, t: float, S: float) -> float:
    """Single-asset pricing PDE evaluated at the constant-coefficient solution.

    ``r g - g_t - r S g_S - sigma**2 S**2 g_SS / 2`` with analytic partials.
    """
    if not is_constant(spec.r_f, spec.sigma, spec.mu):
        raise ValueError("residual is defined for constant coefficients")
    if S <= 0:
        raise ValueError("stock price must be positive")
    r = value_at(spec.r_f, t)
    s = value_at(spec.sigma, t)
    g = spec.gamma
    x = float(xi(g, delta_exponent(r, s)))
    val = S ** g * math.exp(0.5 * x * s * s * t)
    g_t = 0.5 * x * s * s * val
    S_gS = g * val
    S2_gSS = g * (g - 1.0) * val
    return r * val - g_t - r * S_gS - 0.5 * s * s * S2_gSS


def deflator_pi(params: SingleAssetParams, t: float = 0.0, bound: float = DEFLATOR_BOUND) -> float:
    """Cumulative-return deflator ``r_f / mu`` at time ``t``.

    Also checks that ``pi + 1/pi`` stays bounded over every segment of the
    schedules; a segment with zero drift or zero rate fails that check.
    """
    mu, _, r = params.at(t)
    if mu == 0:
        raise ZeroDrift("deflator r_f/mu undefined for zero drift")
    for t0, _, (m, rf) in segments(*_schedule_span(params), params.mu, params.r_f):
        if m == 0 or rf == 0 or abs(rf / m) + abs(m / rf) > bound:
            raise UnboundedDeflator(f"pi + 1/pi unbounded on segment starting at t={t0:g}")
    return r / mu


def _schedule_span(params: SingleAssetParams) -> tuple[float, float]:
    starts = [s for p in (params.mu, params.r_f) if hasattr(p, "starts") for s in p.starts]
    if not starts:
        return 0.0, 1.0
    return min(starts), max(starts) + 1.0


def sigma_R(params: SingleAssetParams, t: float = 0.0) -> float:
    """Volatility of the deflated cumulative-return asset, ``pi * sigma``."""
    return deflator_pi(params, t) * value_at(params.sigma, t)


def log_return_correlation(a: Sequence[float], b: Sequence[float]) -> float:
    ra = np.diff(np.log(np.asarray(a, dtype=float)))
    rb = np.diff(np.log(np.asarray(b, dtype=float)))
    return float(np.corrcoef(ra, rb)[0, 1])
