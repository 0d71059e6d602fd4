"""Binomial trees for both pricing approaches.

Approach one (two risky assets, no bond): ``S`` and ``Z`` move together on a
single Bernoulli driver with moves calibrated to the first two moments of their
arithmetic returns.  The option is priced by backward induction with the
risk-neutral ``q`` and the cumulative return ``R = 1 + r_bar*dt``.

Approach two (stock plus bank account): returns of ``S`` are scaled by the
deflator ``pi = r_f/mu`` so the expected return equals the riskless return;
backward induction then uses the natural probability ``p`` itself.

Trees recombine when every per-step quantity is constant.  Otherwise nodes are
indexed by path (child ``2i`` is the down move, ``2i+1`` the up move), which
caps the depth at :data:`MAX_PATH_STEPS`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateNode, NoArbitrageViolation, PricingError, ZeroDrift
from .market import DualAssetParams, OptionSpec, SingleAssetParams, shadow_rate
from .schedule import value_at

logger = logging.getLogger(__name__)

MAX_PATH_STEPS = 25
MAX_RECOMBINING_STEPS = 200_000


@dataclass(frozen=True)
class LatticeConfig:
    n: int
    maturity: float
    p: float | Sequence[float] = 0.5

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("lattice needs at least one step")
        if self.maturity <= 0:
            raise ValueError("maturity must be positive")
        p = self.p_schedule
        if p.shape != (self.n,):
            raise ValueError("p schedule must have one entry per step")
        if np.any(p <= 0) or np.any(p >= 1):
            raise ValueError("up-probabilities must lie strictly inside (0, 1)")

    @property
    def delta_n(self) -> float:
        return self.maturity / self.n

    @property
    def p_schedule(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.p, dtype=float), (self.n,)).copy()

    @property
    def times(self) -> np.ndarray:
        """Left end ``t_k`` of each step."""
        return np.arange(self.n) * self.delta_n


@dataclass(frozen=True)
class CalibratedMoves:
    """Arithmetic up/down returns per step (``U[k]`` applies from ``t_k`` to ``t_{k+1}``)."""

    U: np.ndarray
    D: np.ndarray
    p: np.ndarray
    delta_n: float
    U_tilde: np.ndarray | None = None
    D_tilde: np.ndarray | None = None
    r_bar: np.ndarray | None = None
    warnings: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.U)


def _moment_moves(mu: np.ndarray, sigma: np.ndarray, p: np.ndarray, dt: float):
    up = mu * dt + sigma * np.sqrt((1 - p) / p) * math.sqrt(dt)
    dn = mu * dt - sigma * np.sqrt(p / (1 - p)) * math.sqrt(dt)
    return up, dn


def calibrate_moves(params: DualAssetParams | SingleAssetParams, cfg: LatticeConfig) -> CalibratedMoves:
    """Moves matching mean ``mu*dt`` and variance ``sigma**2*dt`` of each step's return.

    Non-positive down moves are legal here and only produce a warning.
    """
    dt, p, times = cfg.delta_n, cfg.p_schedule, cfg.times
    mu = np.array([value_at(params.mu, t) for t in times])
    sigma = np.array([value_at(params.sigma, t) for t in times])
    U, D = _moment_moves(mu, sigma, p, dt)
    warnings = []
    if np.any(D <= 0):
        warnings.append("D <= 0 on some steps (returns may be negative on the down branch)")
    if np.any(D <= -1):
        warnings.append("D <= -1 on some steps: down-branch prices are non-positive")
    if isinstance(params, DualAssetParams):
        mu_t = np.array([value_at(params.mu_tilde, t) for t in times])
        sig_t = np.array([value_at(params.sigma_tilde, t) for t in times])
        Ut, Dt = _moment_moves(mu_t, sig_t, p, dt)
        if np.any(Ut <= Dt):
            warnings.append("U~ <= D~ on some steps (Z loads negatively on the driver)")
        r_bar = np.array([shadow_rate(params, t) for t in times])
        moves = CalibratedMoves(U, D, p, dt, Ut, Dt, r_bar, tuple(warnings))
    else:
        moves = CalibratedMoves(U, D, p, dt, warnings=tuple(warnings))
    for w in warnings:
        logger.debug(w)
    return moves


def _spread_moves(moves: CalibratedMoves):
    if moves.U_tilde is None:
        raise PricingError("risk-neutral q needs the moves of both assets")
    dU = moves.U_tilde - moves.U
    dD = moves.D_tilde - moves.D
    denom = dD - dU
    if np.any(denom == 0):
        raise NoArbitrageViolation("identical move spreads: the two assets are collinear on the tree")
    return dU, dD, denom


def risk_neutral_q_all(moves: CalibratedMoves, check: bool = True) -> np.ndarray:
    _, dD, denom = _spread_moves(moves)
    q = dD / denom
    if check and (np.any(q <= 0) or np.any(q >= 1)):
        k = int(np.argmax((q <= 0) | (q >= 1)))
        raise NoArbitrageViolation(f"q = {q[k]:.6g} outside (0, 1) at step {k}; reduce the step size")
    return q


def risk_neutral_q(moves: CalibratedMoves, step: int) -> float:
    """``q = dD/(dD - dU)`` for one step, with ``dU = U~ - U`` and ``dD = D~ - D``."""
    q = float(risk_neutral_q_all(moves, check=False)[step])
    if not 0 < q < 1:
        raise NoArbitrageViolation(f"q = {q:.6g} outside (0, 1) at step {step}; reduce the step size")
    return q


def risk_neutral_q_reduced(moves: CalibratedMoves, step: int) -> float:
    """``p - (dmu/dsigma)*sqrt(p(1-p)dt)``: the simplified form valid for moment-matched moves."""
    p, dt = moves.p[step], moves.delta_n
    mu = (moves.U[step] * p + moves.D[step] * (1 - p)) / dt
    mu_t = (moves.U_tilde[step] * p + moves.D_tilde[step] * (1 - p)) / dt
    sig = (moves.U[step] - moves.D[step]) * math.sqrt(p * (1 - p)) / math.sqrt(dt)
    sig_t = (moves.U_tilde[step] - moves.D_tilde[step]) * math.sqrt(p * (1 - p)) / math.sqrt(dt)
    return p - (mu_t - mu) / (sig_t - sig) * math.sqrt(p * (1 - p) * dt)


def cumulative_return_all(moves: CalibratedMoves) -> np.ndarray:
    _, _, denom = _spread_moves(moves)
    num = (1 + moves.U) * (1 + moves.D_tilde) - (1 + moves.U_tilde) * (1 + moves.D)
    return num / denom


def cumulative_return_R(moves: CalibratedMoves, step: int) -> float:
    return float(cumulative_return_all(moves)[step])


@dataclass
class LatticeResult:
    option_value_root: float
    q_schedule: np.ndarray
    R_schedule: np.ndarray
    layout: str
    node_values: list[np.ndarray] | None = None
    node_S: list[np.ndarray] | None = None
    node_Z: list[np.ndarray] | None = None
    replication_weights: list[np.ndarray] | None = None
    warnings: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)


def _constant(*arrays: np.ndarray) -> bool:
    return all(np.all(a == a[0]) for a in arrays if a is not None)


def _levels(x0: float, fu: np.ndarray, fd: np.ndarray, recombining: bool) -> list[np.ndarray]:
    """Asset value at every node, level by level."""
    n = len(fu)
    if recombining:
        out = []
        for k in range(n + 1):
            j = np.arange(k + 1)
            out.append(x0 * np.power(fu[0], j) * np.power(fd[0], k - j))
        return out
    out = [np.array([x0])]
    for k in range(n):
        prev = out[-1]
        out.append(np.stack([prev * fd[k], prev * fu[k]], axis=-1).ravel())
    return out


def _terminal(x0: float, fu: np.ndarray, fd: np.ndarray, recombining: bool) -> np.ndarray:
    n = len(fu)
    if recombining:
        j = np.arange(n + 1)
        return x0 * np.power(fu[0], j) * np.power(fd[0], n - j)
    return _levels(x0, fu, fd, False)[-1]


def _children(values: np.ndarray, recombining: bool) -> tuple[np.ndarray, np.ndarray]:
    """(up, down) child values for every node of the parent level."""
    if recombining:
        return values[1:], values[:-1]
    return values[1::2], values[0::2]


def _backward(terminal: np.ndarray, prob: np.ndarray, disc: np.ndarray, recombining: bool,
              keep: bool) -> tuple[float, list[np.ndarray] | None]:
    values = terminal
    kept = [values] if keep else None
    for k in range(len(prob) - 1, -1, -1):
        up, dn = _children(values, recombining)
        values = (prob[k] * up + (1 - prob[k]) * dn) * disc[k]
        if keep:
            kept.append(values)
    if keep:
        kept.reverse()
    return float(values[0]), kept


def _check_depth(n: int, recombining: bool) -> None:
    if recombining and n > MAX_RECOMBINING_STEPS:
        raise PricingError(f"n = {n} exceeds the recombining limit {MAX_RECOMBINING_STEPS}")
    if not recombining and n > MAX_PATH_STEPS:
        raise PricingError(
            f"time-varying moves need a path-indexed tree; n = {n} exceeds {MAX_PATH_STEPS}")


def price_lr_tree(S0: float, Z0: float, params: DualAssetParams, spec: OptionSpec,
                  cfg: LatticeConfig, keep_nodes: bool = False) -> LatticeResult:
    """Backward induction ``C_k = (q C_up + (1-q) C_down) / R`` on the joint tree of ``S`` and ``Z``.

    With ``keep_nodes`` the per-node prices, option values and replicating
    holdings ``a`` (shares of ``S``; the ``Z`` holding is stored in
    ``extra['b']``) are returned.
    """
    moves = calibrate_moves(params, cfg)
    q = risk_neutral_q_all(moves)
    R = cumulative_return_all(moves)
    fu, fd = 1 + moves.U, 1 + moves.D
    fut, fdt = 1 + moves.U_tilde, 1 + moves.D_tilde
    recombining = _constant(fu, fd, fut, fdt, q, R)
    _check_depth(cfg.n, recombining)

    S_T = _terminal(S0, fu, fd, recombining)
    Z_T = _terminal(Z0, fut, fdt, recombining)
    if not (np.all(np.isfinite(S_T)) and np.all(np.isfinite(Z_T))):
        raise PricingError("terminal node prices overflow; reduce n or the volatility")
    payoff = spec.payoff_two_asset(S_T, Z_T)
    root, kept = _backward(payoff, q, 1.0 / R, recombining, keep_nodes)
    result = LatticeResult(root, q, R, "recombining" if recombining else "path", warnings=moves.warnings)
    result.extra["moves"] = moves
    if keep_nodes:
        s_lv = _levels(S0, fu, fd, recombining)
        z_lv = _levels(Z0, fut, fdt, recombining)
        a_w, b_w = [], []
        for k in range(cfg.n):
            cu, cd = _children(kept[k + 1], recombining)
            su, sd = _children(s_lv[k + 1], recombining)
            zu, zd = _children(z_lv[k + 1], recombining)
            det = su * zd - sd * zu
            a_w.append((cu * zd - cd * zu) / det)
            b_w.append((su * cd - sd * cu) / det)
        result.node_values, result.node_S, result.node_Z = kept, s_lv, z_lv
        result.replication_weights = a_w
        result.extra["b"] = b_w
    return result


def one_step_martingale_errors(result: LatticeResult) -> dict[str, float]:
    """Max relative error of ``E^q[X_{k+1}]/R - X_k`` over all nodes for ``S``, ``Z`` and ``C``."""
    if result.node_S is None:
        raise ValueError("price with keep_nodes=True to check node martingales")
    rec = result.layout == "recombining"
    out = {}
    for name, levels in (("S", result.node_S), ("Z", result.node_Z), ("C", result.node_values)):
        if levels is None:
            continue
        worst = 0.0
        for k in range(len(levels) - 1):
            up, dn = _children(levels[k + 1], rec)
            q, R = result.q_schedule[k], result.R_schedule[k]
            expect = (q * up + (1 - q) * dn) / R
            scale = np.maximum(np.abs(levels[k]), 1e-300)
            worst = max(worst, float(np.max(np.abs(expect - levels[k]) / scale)))
        out[name] = worst
    return out


def enumerate_expectation(S0: float, Z0: float, spec: OptionSpec, moves: CalibratedMoves) -> float:
    """Brute-force discounted expectation over all ``2**n`` paths (independent oracle, small n)."""
    n = moves.n
    if n > 16:
        raise ValueError("enumeration is exponential; keep n <= 16")
    q = risk_neutral_q_all(moves)
    R = cumulative_return_all(moves)
    total = 0.0
    for path in range(2 ** n):
        s, z, prob = S0, Z0, 1.0
        for k in range(n):
            if (path >> k) & 1:
                s *= 1 + moves.U[k]
                z *= 1 + moves.U_tilde[k]
                prob *= q[k]
            else:
                s *= 1 + moves.D[k]
                z *= 1 + moves.D_tilde[k]
                prob *= 1 - q[k]
        total += prob * float(spec.payoff_two_asset(s, z))
    return total / float(np.prod(R))


@dataclass(frozen=True)
class RatioMartingaleReport:
    """One-step drift of ``Z/S`` under ``q`` (relative to the current ratio) per step."""

    relative_deviation: np.ndarray
    absolute_deviation_root: np.ndarray
    four_outcome_deviation: np.ndarray
    delta_n: float

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.relative_deviation)))


def ratio_martingale_diagnostic(result: LatticeResult, S0: float, Z0: float,
                                moves: CalibratedMoves) -> RatioMartingaleReport:
    """Measure how far ``Z/S`` is from a one-step martingale under ``q``.

    The joint tree realises two outcomes (both assets up, or both down).  The
    four-outcome variant treats the two moves as independent draws and is
    reported for comparison only.
    """
    q = result.q_schedule
    uu = (1 + moves.U_tilde) / (1 + moves.U)
    dd = (1 + moves.D_tilde) / (1 + moves.D)
    ud = (1 + moves.U_tilde) / (1 + moves.D)
    du = (1 + moves.D_tilde) / (1 + moves.U)
    two = q * uu + (1 - q) * dd - 1.0
    four = q * q * uu + q * (1 - q) * (ud + du) + (1 - q) ** 2 * dd - 1.0
    return RatioMartingaleReport(two, two * Z0 / S0, four, moves.delta_n)


def ratio_martingale_scaling(params: DualAssetParams, p: float, deltas: Sequence[float]) -> dict:
    """Deviation of the one-step ``Z/S`` expectation at each step size and the ratios between them."""
    devs = []
    for dt in deltas:
        cfg = LatticeConfig(1, dt, p)
        moves = calibrate_moves(params, cfg)
        q = risk_neutral_q_all(moves)
        R = cumulative_return_all(moves)
        res = LatticeResult(float("nan"), q, R, "recombining")
        devs.append(abs(float(ratio_martingale_diagnostic(res, 1.0, 1.0, moves).relative_deviation[0])))
    ratios = [a / b for a, b in zip(devs, devs[1:])]
    return {"deltas": list(deltas), "deviations": devs, "ratios": ratios}


# -- approach two: deflated cumulative returns ---------------------------------


@dataclass(frozen=True)
class PiTree:
    S0: float
    U_pi: np.ndarray
    D_pi: np.ndarray
    pi: np.ndarray
    rf_delta: np.ndarray
    p: np.ndarray
    delta_n: float
    mu: np.ndarray
    sigma: np.ndarray
    warnings: tuple[str, ...] = ()
    arbitrage_band_ok: bool = True

    @property
    def n(self) -> int:
        return len(self.U_pi)

    def return_moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-step mean and variance of the deflated arithmetic return."""
        mean = self.p * self.U_pi + (1 - self.p) * self.D_pi
        var = self.p * (self.U_pi - mean) ** 2 + (1 - self.p) * (self.D_pi - mean) ** 2
        return mean, var


def build_pi_tree(S0: float, params: SingleAssetParams, cfg: LatticeConfig) -> PiTree:
    """Tree whose returns are the plain moment-matched returns times ``pi = r_f/mu``.

    ``r_f`` is an instantaneous rate; the per-step riskless return is
    ``r_f(t_k) * dt``.  The band ``D_pi < r_f*dt < U_pi`` is checked and
    reported rather than enforced.
    """
    times = cfg.times
    mu = np.array([value_at(params.mu, t) for t in times])
    if np.any(mu == 0):
        raise ZeroDrift("mu = 0 on some step: deflator r_f/mu undefined")
    sigma = np.array([value_at(params.sigma, t) for t in times])
    rf = np.array([value_at(params.r_f, t) for t in times])
    p, dt = cfg.p_schedule, cfg.delta_n
    U, D = _moment_moves(mu, sigma, p, dt)
    pi = rf / mu
    U_pi, D_pi = U * pi, D * pi
    rf_delta = rf * dt
    warnings = []
    lo, hi = np.minimum(U_pi, D_pi), np.maximum(U_pi, D_pi)
    band_ok = bool(np.all((lo < rf_delta) & (rf_delta < hi)))
    if not band_ok:
        warnings.append("no-arbitrage band D < r_f*dt < U violated on some steps")
    if np.any(D_pi <= -1):
        warnings.append("deflated down move <= -1: non-positive node prices")
    for w in warnings:
        logger.warning(w)
    return PiTree(float(S0), U_pi, D_pi, pi, rf_delta, p, dt, mu, sigma, tuple(warnings), band_ok)


def price_pi_tree(tree: PiTree, spec: OptionSpec, keep_nodes: bool = False) -> LatticeResult:
    """Backward induction with the natural ``p`` and discount ``1/(1 + r_f*dt)``.

    ``q_schedule`` of the result is ``p``; ``extra['q_implied']`` holds the
    probability implied by the deflated moves, ``(r_f*dt - D_pi)/(U_pi - D_pi)``,
    which equals ``p`` up to rounding.
    """
    fu, fd = 1 + tree.U_pi, 1 + tree.D_pi
    disc = 1.0 / (1 + tree.rf_delta)
    recombining = _constant(fu, fd, tree.p, disc)
    _check_depth(tree.n, recombining)
    S_T = _terminal(tree.S0, fu, fd, recombining)
    payoff = spec.payoff_single(S_T)
    root, kept = _backward(payoff, tree.p, disc, recombining, keep_nodes)
    result = LatticeResult(root, tree.p.copy(), 1 + tree.rf_delta,
                           "recombining" if recombining else "path", warnings=tree.warnings)
    result.extra["q_implied"] = (tree.rf_delta - tree.D_pi) / (tree.U_pi - tree.D_pi)
    if keep_nodes:
        s_lv = _levels(tree.S0, fu, fd, recombining)
        weights = []
        for k in range(tree.n):
            cu, cd = _children(kept[k + 1], recombining)
            su, sd = _children(s_lv[k + 1], recombining)
            weights.append(replication_weight((cu, cd), (su, sd)))
        result.node_values, result.node_S, result.replication_weights = kept, s_lv, weights
    return result


def replication_weight(step_values, step_prices):
    """Shares of the deflated asset that hedge one step: ``(C_up - C_down)/(S_up - S_down)``."""
    cu, cd = (np.asarray(v, dtype=float) for v in step_values)
    su, sd = (np.asarray(v, dtype=float) for v in step_prices)
    spread = su - sd
    if np.any(spread == 0):
        raise DegenerateNode("up and down prices coincide at a node")
    out = (cu - cd) / spread
    return float(out) if out.ndim == 0 else out


def replication_weight_closed_form(tree: PiTree, step: int, S: np.ndarray, c_up, c_down):
    """Hedge ratio written through the model parameters rather than node prices."""
    p, dt = tree.p[step], tree.delta_n
    return ((np.asarray(c_up) - np.asarray(c_down)) * tree.mu[step] * math.sqrt(p * (1 - p))
            * math.sqrt(dt) / (np.asarray(S) * tree.sigma[step] * tree.rf_delta[step]))


def hedge_self_financing_error(result: LatticeResult, tree: PiTree) -> float:
    """Max abs error of ``a*S - C = (a*S_up - C_up)/(1 + r_f*dt)`` over all nodes."""
    if result.node_S is None:
        raise ValueError("price with keep_nodes=True to check the hedge")
    rec = result.layout == "recombining"
    worst = 0.0
    for k in range(tree.n):
        a = result.replication_weights[k]
        cu, cd = _children(result.node_values[k + 1], rec)
        su, sd = _children(result.node_S[k + 1], rec)
        p_now = a * result.node_S[k] - result.node_values[k]
        up_leg = a * su - cu
        down_leg = a * sd - cd
        scale = np.maximum(1.0, np.abs(result.node_values[k]))
        worst = max(worst,
                    float(np.max(np.abs(p_now - up_leg / (1 + tree.rf_delta[k])) / scale)),
                    float(np.max(np.abs(up_leg - down_leg) / scale)))
    return worst


def pi_tree_limit_price(S0: float, params: SingleAssetParams, spec: OptionSpec, n: int) -> float:
    """Price the tree tends to as ``p`` goes to 0 or 1: one surviving path earning ``r_f*dt`` per step."""
    cfg = LatticeConfig(n, spec.maturity, 0.5)
    rf = np.array([value_at(params.r_f, t) for t in cfg.times]) * cfg.delta_n
    growth = float(np.prod(1 + rf))
    return float(spec.payoff_single(np.array([S0 * growth]))[0]) / growth


def bank_account_path(rf_delta: Sequence[float], cfg: LatticeConfig | None = None) -> np.ndarray:
    """``beta_k = prod_{j<=k} (1 + r_j)`` with ``beta_0 = 1``; ``rf_delta`` are per-step returns."""
    rf_delta = np.asarray(rf_delta, dtype=float)
    if cfg is not None and len(rf_delta) != cfg.n:
        raise ValueError("rate schedule length must equal the number of steps")
    return np.concatenate([[1.0], np.cumprod(1 + rf_delta)])
