"""Market parameters and the analytic relations between them.

Two perfectly correlated risky assets ``S`` and ``Z`` (one Wiener driver) imply a
shadow riskless rate even when no bond trades.  This module holds the parameter
containers and the closed-form relations: shadow rate, market price of risk,
drifts under the stock-numeraire measure, and the Sharpe-ratio consistency
check.

All rates and drifts are per unit time, in the same unit as option maturities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateVolatilitySpread
from .schedule import Param, as_param, param_to_json, segment_values, value_at

DEFAULT_SPREAD_EPS = 1e-10

PAYOFF_KINDS = ("call-on-portfolio", "call-on-single", "custom")


@dataclass(frozen=True)
class DualAssetParams:
    """Drifts and volatilities of the two risky assets.

    ``sigma_tilde`` is signed: a negative value means ``Z`` loads on the shared
    Wiener process with the opposite sign (e.g. the perpetual derivative
    ``S**gamma`` with ``gamma < 0``).  Equality of the two volatilities is only
    rejected by the operations that divide by the spread.
    """

    mu: Param
    sigma: Param
    mu_tilde: Param
    sigma_tilde: Param
    spread_eps: float = DEFAULT_SPREAD_EPS

    def __post_init__(self) -> None:
        for name in ("mu", "sigma", "mu_tilde", "sigma_tilde"):
            object.__setattr__(self, name, as_param(getattr(self, name)))
        if min(segment_values(self.sigma)) <= 0:
            raise ValueError("sigma must be positive")

    @classmethod
    def from_shadow_rate(cls, r_bar: float, sigma: float, sigma_tilde: float,
                         mu: float | None = None) -> "DualAssetParams":
        """Constant parameters whose shadow rate is exactly ``r_bar``.

        ``mu`` defaults to ``r_bar``; ``mu_tilde`` then follows from equal Sharpe
        ratios.
        """
        mu = r_bar if mu is None else mu
        mu_tilde = r_bar + (mu - r_bar) * sigma_tilde / sigma
        return cls(mu, sigma, mu_tilde, sigma_tilde)

    @classmethod
    def from_json(cls, doc: dict) -> "DualAssetParams":
        return cls(doc["mu"], doc["sigma"], doc["mu_tilde"], doc["sigma_tilde"],
                   doc.get("spread_eps", DEFAULT_SPREAD_EPS))

    def to_json(self) -> dict:
        return {k: param_to_json(getattr(self, k)) for k in ("mu", "sigma", "mu_tilde", "sigma_tilde")}

    def at(self, t: float) -> tuple[float, float, float, float]:
        return (value_at(self.mu, t), value_at(self.sigma, t),
                value_at(self.mu_tilde, t), value_at(self.sigma_tilde, t))

    def swapped(self) -> "DualAssetParams":
        return DualAssetParams(self.mu_tilde, self.sigma_tilde, self.mu, self.sigma, self.spread_eps)


@dataclass(frozen=True)
class SingleAssetParams:
    """One stock plus a riskless rate ``r_f`` (continuously compounded, per unit time)."""

    mu: Param
    sigma: Param
    r_f: Param

    def __post_init__(self) -> None:
        for name in ("mu", "sigma", "r_f"):
            object.__setattr__(self, name, as_param(getattr(self, name)))
        if min(segment_values(self.sigma)) <= 0:
            raise ValueError("sigma must be positive")

    @classmethod
    def from_json(cls, doc: dict) -> "SingleAssetParams":
        return cls(doc["mu"], doc["sigma"], doc["r_f"])

    def to_json(self) -> dict:
        return {k: param_to_json(getattr(self, k)) for k in ("mu", "sigma", "r_f")}

    def at(self, t: float) -> tuple[float, float, float]:
        return value_at(self.mu, t), value_at(self.sigma, t), value_at(self.r_f, t)


@dataclass(frozen=True)
class OptionSpec:
    """European contract terms.

    ``payoff`` selects the terminal function:

    * ``call-on-portfolio``: ``max(0, eta*S_T + (1-eta)*Z_T - K)``
    * ``call-on-single``: ``max(0, S_T - K)``
    * ``custom``: ``g(x)`` where ``x`` is the portfolio value for two-asset
      models and the single underlying otherwise.

    A zero strike is accepted so the forward-like limit can be priced.
    """

    strike: float
    maturity: float
    eta: float = 1.0
    payoff: str = "call-on-portfolio"
    g: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.strike < 0:
            raise ValueError("strike must be non-negative")
        if self.maturity <= 0:
            raise ValueError("maturity must be positive")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.payoff not in PAYOFF_KINDS:
            raise ValueError(f"payoff must be one of {PAYOFF_KINDS}")
        if self.payoff == "custom" and self.g is None:
            raise ValueError("custom payoff requires g")

    @classmethod
    def from_json(cls, doc: dict) -> "OptionSpec":
        return cls(float(doc["strike"]), float(doc["maturity"]), float(doc.get("eta", 1.0)),
                   doc.get("payoff", "call-on-portfolio"))

    def portfolio(self, s, z):
        return self.eta * s + (1.0 - self.eta) * z

    def payoff_two_asset(self, s, z):
        if self.payoff == "call-on-single":
            return np.maximum(s - self.strike, 0.0)
        x = self.portfolio(s, z)
        if self.payoff == "custom":
            return self.g(x)
        return np.maximum(x - self.strike, 0.0)

    def payoff_single(self, s):
        if self.payoff == "custom":
            return self.g(s)
        return np.maximum(s - self.strike, 0.0)


def _spread(params: DualAssetParams, t: float) -> tuple[float, float, float, float, float]:
    mu, sigma, mu_t, sigma_t = params.at(t)
    d_sigma = sigma_t - sigma
    if abs(d_sigma) < params.spread_eps:
        raise DegenerateVolatilitySpread(
            f"|sigma_tilde - sigma| = {abs(d_sigma):.3g} below {params.spread_eps:g}: "
            "shadow rate undefined")
    return mu, sigma, mu_t, sigma_t, d_sigma


def shadow_rate(params: DualAssetParams, t: float = 0.0) -> float:
    """Riskless rate spanned by the two assets, ``(mu*sig~ - mu~*sig) / (sig~ - sig)``."""
    mu, sigma, mu_t, sigma_t, d_sigma = _spread(params, t)
    return (mu * sigma_t - mu_t * sigma) / d_sigma


def market_price_of_risk(params: DualAssetParams, t: float = 0.0) -> float:
    """Girsanov kernel for the stock-numeraire measure: ``dmu/dsigma - sigma``."""
    mu, sigma, mu_t, sigma_t, d_sigma = _spread(params, t)
    return (mu_t - mu) / d_sigma - sigma


@dataclass(frozen=True)
class QDrifts:
    drift_S: float
    drift_Z: float
    drift_Zhat: float
    r_bar: float


def q_dynamics(params: DualAssetParams, t: float = 0.0) -> QDrifts:
    """Drifts of ``S``, ``Z`` and ``Z/S`` under the measure that makes ``Z/S`` a martingale."""
    r_bar = shadow_rate(params, t)
    _, sigma, _, sigma_t = params.at(t)
    return QDrifts(r_bar + sigma * sigma, r_bar + sigma * sigma_t, 0.0, r_bar)


@dataclass(frozen=True)
class SharpeReport:
    r_bar: float
    sharpe_S: float
    sharpe_Z: float
    difference: float
    sharpe_S_Q: float
    sharpe_Z_Q: float
    r_Q: float

    @property
    def consistent(self) -> bool:
        return self.difference <= 1e-12 * max(1.0, abs(self.sharpe_S))


def sharpe_consistency_check(params: DualAssetParams, t: float = 0.0) -> SharpeReport:
    """Sharpe ratios of both assets under P and Q, measured against the shadow rate.

    The rate solving the Q-side equality is recomputed from the Q drifts so a
    mismatch would show up as ``r_Q != r_bar``.
    """
    mu, sigma, mu_t, sigma_t = params.at(t)
    qd = q_dynamics(params, t)
    r_bar = qd.r_bar
    nan = float("nan")
    sh_s = (mu - r_bar) / sigma
    sh_z = (mu_t - r_bar) / sigma_t if sigma_t != 0 else nan
    q_s = (qd.drift_S - r_bar) / sigma
    q_z = (qd.drift_Z - r_bar) / sigma_t if sigma_t != 0 else nan
    r_q = (qd.drift_S * sigma_t - qd.drift_Z * sigma) / (sigma_t - sigma)
    diff = abs(sh_s - sh_z) if sigma_t != 0 else 0.0
    return SharpeReport(r_bar, sh_s, sh_z, diff, q_s, q_z, r_q)


def sigma_spread_ok(params: DualAssetParams, t: float = 0.0) -> bool:
    _, sigma, _, sigma_t = params.at(t)
    return math.isfinite(sigma_t) and abs(sigma_t - sigma) >= params.spread_eps
