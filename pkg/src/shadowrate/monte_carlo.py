"""Monte Carlo simulation and pricing for both market models.

Random numbers come from PCG64 with one jump-ahead stream per fixed-size
sub-batch of paths, so results depend only on the seed and never on how the
sub-batches are spread across workers.  Normals are produced by inverting the
normal CDF on 53-bit uniforms.  Per-batch moments are combined in batch order
with the pairwise update of Chan et al., which keeps the aggregate
bit-identical for a given seed.

All log-normal processes are stepped exactly over intervals on which the
coefficients are constant; Euler stepping is available only as a diagnostic.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .closed_form import black_scholes_call
from .companion import deflator_pi
from .errors import DegenerateVolatilitySpread, ZeroDrift
from .market import DualAssetParams, OptionSpec, SingleAssetParams, shadow_rate
from .schedule import is_constant, refine_grid, segments

SUB_BATCH = 65_536
_TWO_M53 = 2.0 ** -53


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n_paths: int

    def within(self, target: float, n_se: float = 3.0) -> bool:
        return abs(self.value - target) <= n_se * self.std_error


@dataclass(frozen=True)
class PathBatch:
    paths: np.ndarray
    times: np.ndarray
    seed: int
    scheme: str
    measure: str
    process_tag: str

    @property
    def terminal(self) -> np.ndarray:
        return self.paths[:, -1]


# -- random numbers -----------------------------------------------------------

def batch_normals(seed: int, batch: int, n_paths: int, n_dims: int) -> np.ndarray:
    """Standard normals for one sub-batch, shape ``(n_paths, n_dims)``."""
    bits = np.random.PCG64(seed).jumped(batch).random_raw(n_paths * n_dims)
    u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53
    return special.ndtri(u).reshape(n_paths, n_dims)


def _batch_sizes(n_paths: int) -> list[int]:
    full, rest = divmod(n_paths, SUB_BATCH)
    return [SUB_BATCH] * full + ([rest] if rest else [])


def normals(seed: int, n_paths: int, n_dims: int) -> np.ndarray:
    return np.vstack([batch_normals(seed, b, n, n_dims) for b, n in enumerate(_batch_sizes(n_paths))])


def _combine(a: tuple[int, float, float], b: tuple[int, float, float]) -> tuple[int, float, float]:
    na, ma, qa = a
    nb, mb, qb = b
    n = na + nb
    d = mb - ma
    return n, ma + d * nb / n, qa + qb + d * d * na * nb / n


def run_estimator(sample: Callable[[np.ndarray], np.ndarray], seed: int, n_paths: int,
                  n_dims: int, antithetic: bool = False, workers: int = 1) -> McEstimate:
    """Average ``sample(z)`` over ``n_paths`` draws of ``z ~ N(0, I_{n_dims})``.

    With ``antithetic`` each normal vector is paired with its negation and the
    pair mean is the sampled quantity; ``n_paths`` then counts both members.
    """
    if n_paths < 2:
        raise ValueError("need at least two paths")
    n_draws = n_paths // 2 if antithetic else n_paths
    sizes = _batch_sizes(n_draws)

    def one(b_n):
        b, n = b_n
        z = batch_normals(seed, b, n, n_dims)
        v = sample(z)
        if antithetic:
            v = 0.5 * (v + sample(-z))
        v = np.asarray(v, dtype=float)
        m = float(v.mean())
        return n, m, float(np.square(v - m).sum())

    jobs = list(enumerate(sizes))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(one, jobs))
    else:
        parts = [one(j) for j in jobs]
    acc = parts[0]
    for p in parts[1:]:
        acc = _combine(acc, p)
    n, mean, m2 = acc
    var = m2 / (n - 1)
    return McEstimate(mean, math.sqrt(var / n), 2 * n if antithetic else n)


# -- two-asset model under the stock-numeraire measure ------------------------

def _require_spread(params: DualAssetParams, a: float, b: float) -> None:
    for t0, _, _ in segments(a, b, params.mu, params.sigma, params.mu_tilde, params.sigma_tilde):
        shadow_rate(params, t0)


def _q_pair_log_increments(params: DualAssetParams, t0: float, t1: float, z):
    mu, s, mu_t, s_t = params.at(t0)
    r = shadow_rate(params, t0)
    dt = t1 - t0
    dw = math.sqrt(dt) * z
    return (r + 0.5 * s * s) * dt + s * dw, (r + s * s_t - 0.5 * s_t * s_t) * dt + s_t * dw


def simulate_q_pair(S0: float, Z0: float, params: DualAssetParams, T: float, n_steps: int,
                    n_paths: int, seed: int, scheme: str = "exact-lognormal",
                    t0: float = 0.0) -> tuple[PathBatch, PathBatch]:
    """Joint paths of ``S`` and ``Z`` under the measure where ``Z/S`` is a martingale.

    Both assets use the same normal increments.  The uniform grid is refined at
    every schedule breakpoint so each step has constant coefficients.
    """
    _require_spread(params, t0, T)
    if scheme not in ("exact-lognormal", "euler"):
        raise ValueError("scheme must be 'exact-lognormal' or 'euler'")
    times = refine_grid(np.linspace(t0, T, n_steps + 1), params.mu, params.sigma,
                        params.mu_tilde, params.sigma_tilde)
    z = normals(seed, n_paths, len(times) - 1)
    S = np.empty((n_paths, len(times)))
    Z = np.empty_like(S)
    S[:, 0], Z[:, 0] = S0, Z0
    for k, (a, b) in enumerate(zip(times, times[1:])):
        if scheme == "exact-lognormal":
            ls, lz = _q_pair_log_increments(params, a, b, z[:, k])
            S[:, k + 1] = S[:, k] * np.exp(ls)
            Z[:, k + 1] = Z[:, k] * np.exp(lz)
        else:
            _, s, _, s_t = params.at(a)
            r = shadow_rate(params, a)
            dt = b - a
            dw = math.sqrt(dt) * z[:, k]
            S[:, k + 1] = S[:, k] * (1.0 + (r + s * s) * dt + s * dw)
            Z[:, k + 1] = Z[:, k] * (1.0 + (r + s * s_t) * dt + s_t * dw)
    return (PathBatch(S, times, seed, scheme, "Q", "S"),
            PathBatch(Z, times, seed, scheme, "Q", "Z"))


def ratio_batch(S: PathBatch, Z: PathBatch) -> PathBatch:
    return PathBatch(Z.paths / S.paths, S.times, S.seed, S.scheme, S.measure, "Z_hat")


def _lr_terminal(S: float, Z: float, params: DualAssetParams, t: float, T: float, z: np.ndarray):
    ls = np.zeros(z.shape[0])
    lz = np.zeros(z.shape[0])
    for k, (a, b, _) in enumerate(segments(t, T, params.mu, params.sigma,
                                           params.mu_tilde, params.sigma_tilde)):
        dls, dlz = _q_pair_log_increments(params, a, b, z[:, k])
        ls += dls
        lz += dlz
    return S * np.exp(ls), Z * np.exp(lz)


def _n_segments(a: float, b: float, *params) -> int:
    return sum(1 for _ in segments(a, b, *params))


def mc_price_lr(S0: float, Z0: float, params: DualAssetParams, spec: OptionSpec, n_paths: int,
                seed: int, t: float = 0.0, antithetic: bool = False, workers: int = 1) -> McEstimate:
    """Expectation of ``(S_t / S_T) * payoff`` under the stock-numeraire measure.

    One normal per constant-coefficient segment; for constant parameters this is
    a single terminal draw.
    """
    T = spec.maturity
    _require_spread(params, t, T)
    n_dims = _n_segments(t, T, params.mu, params.sigma, params.mu_tilde, params.sigma_tilde)

    def sample(z):
        S_T, Z_T = _lr_terminal(S0, Z0, params, t, T, z)
        return S0 / S_T * spec.payoff_two_asset(S_T, Z_T)

    return run_estimator(sample, seed, n_paths, n_dims, antithetic, workers)


def lr_terminal_log_moments(S0: float, Z0: float, params: DualAssetParams, T: float,
                            t: float = 0.0) -> dict[str, float]:
    """Exact means and variances of ``ln S_T`` and ``ln Z_T`` (schedules allowed)."""
    out = {"mean_log_S": math.log(S0), "mean_log_Z": math.log(Z0), "var_log_S": 0.0, "var_log_Z": 0.0}
    for a, b, (_, s, _, s_t) in segments(t, T, params.mu, params.sigma, params.mu_tilde, params.sigma_tilde):
        r = shadow_rate(params, a)
        dt = b - a
        out["mean_log_S"] += (r + 0.5 * s * s) * dt
        out["mean_log_Z"] += (r + s * s_t - 0.5 * s_t * s_t) * dt
        out["var_log_S"] += s * s * dt
        out["var_log_Z"] += s_t * s_t * dt
    return out


# -- single stock with a riskless rate ----------------------------------------

def _single_params(params: SingleAssetParams):
    return params.mu, params.sigma, params.r_f


def _single_log_increment(params: SingleAssetParams, a: float, b: float, z, deflated: bool):
    mu, s, r = params.at(a)
    dt = b - a
    if deflated:
        s = deflator_pi(params, a) * s
        mu = r
    return (mu - 0.5 * s * s) * dt + s * math.sqrt(dt) * z


def rate_integral(params: SingleAssetParams, a: float, b: float) -> float:
    return sum((t1 - t0) * r for t0, t1, (r,) in segments(a, b, params.r_f))


def simulate_p_single(S0: float, params: SingleAssetParams, T: float, n_steps: int, n_paths: int,
                      seed: int, deflated: bool = False, t0: float = 0.0) -> PathBatch:
    """Stock paths under the natural measure, plain or with deflated cumulative return.

    The deflated process has drift ``r_f`` and volatility ``sigma_R = (r_f/mu) sigma``.
    """
    if deflated:
        for a, _, (mu,) in segments(t0, T, params.mu):
            if mu == 0:
                raise ZeroDrift("deflated process needs nonzero drift")
    times = refine_grid(np.linspace(t0, T, n_steps + 1), *_single_params(params))
    z = normals(seed, n_paths, len(times) - 1)
    logs = np.zeros((n_paths, len(times)))
    for k, (a, b) in enumerate(zip(times, times[1:])):
        logs[:, k + 1] = logs[:, k] + _single_log_increment(params, a, b, z[:, k], deflated)
    return PathBatch(S0 * np.exp(logs), times, seed, "exact-lognormal", "P",
                     "S_pi" if deflated else "S")


def _single_terminal(S0: float, params: SingleAssetParams, t: float, T: float, z, deflated: bool):
    lg = np.zeros(z.shape[0])
    for k, (a, b, _) in enumerate(segments(t, T, *_single_params(params))):
        lg += _single_log_increment(params, a, b, z[:, k], deflated)
    return S0 * np.exp(lg)


def mc_price_pi(S0: float, params: SingleAssetParams, spec: OptionSpec, n_paths: int, seed: int,
                t: float = 0.0, antithetic: bool = False, workers: int = 1) -> McEstimate:
    """Discounted expected payoff on the deflated asset under the natural measure."""
    T = spec.maturity
    deflator_pi(params, t)
    disc = math.exp(-rate_integral(params, t, T))
    n_dims = _n_segments(t, T, *_single_params(params))

    def sample(z):
        return disc * spec.payoff_single(_single_terminal(S0, params, t, T, z, True))

    return run_estimator(sample, seed, n_paths, n_dims, antithetic, workers)


def mc_price_bsm(S0: float, params: SingleAssetParams, spec: OptionSpec, n_paths: int, seed: int,
                 t: float = 0.0, antithetic: bool = False) -> McEstimate:
    """Classical risk-neutral Monte Carlo (stock drift replaced by ``r_f``)."""
    T = spec.maturity
    rn = SingleAssetParams(params.r_f, params.sigma, params.r_f)
    disc = math.exp(-rate_integral(params, t, T))
    n_dims = _n_segments(t, T, *_single_params(params))

    def sample(z):
        return disc * spec.payoff_single(_single_terminal(S0, rn, t, T, z, False))

    return run_estimator(sample, seed, n_paths, n_dims, antithetic)


def _numeraire_increments(params: SingleAssetParams, a: float, b: float, z):
    """Log increments of ``S`` and ``S_pi`` under the measure making ``S/S_pi`` a martingale."""
    _, s, _ = params.at(a)
    sr = deflator_pi(params, a) * s
    if abs(sr - s) < 1e-14 * s:
        raise DegenerateVolatilitySpread("sigma_R == sigma: numeraire pair is degenerate")
    dt = b - a
    dw = math.sqrt(dt) * z
    return (sr * s - 0.5 * s * s) * dt + s * dw, 0.5 * sr * sr * dt + sr * dw


def simulate_numeraire_pair(S0: float, params: SingleAssetParams, T: float, n_steps: int,
                            n_paths: int, seed: int, t0: float = 0.0,
                            S_pi0: float | None = None) -> tuple[PathBatch, PathBatch]:
    """Joint paths of ``S`` and ``S_pi`` under the deflated-numeraire measure."""
    times = refine_grid(np.linspace(t0, T, n_steps + 1), *_single_params(params))
    z = normals(seed, n_paths, len(times) - 1)
    ls = np.zeros((n_paths, len(times)))
    lp = np.zeros_like(ls)
    for k, (a, b) in enumerate(zip(times, times[1:])):
        dls, dlp = _numeraire_increments(params, a, b, z[:, k])
        ls[:, k + 1] = ls[:, k] + dls
        lp[:, k + 1] = lp[:, k] + dlp
    S_pi0 = S0 if S_pi0 is None else S_pi0
    return (PathBatch(S0 * np.exp(ls), times, seed, "exact-lognormal", "Q", "S"),
            PathBatch(S_pi0 * np.exp(lp), times, seed, "exact-lognormal", "Q", "S_pi"))


def mc_price_deflated_numeraire(S0: float, params: SingleAssetParams, spec: OptionSpec,
                                n_paths: int, seed: int, t: float = 0.0,
                                antithetic: bool = False, workers: int = 1) -> McEstimate:
    """Price with the deflated asset as numeraire.

    Averages ``(S_pi_t / S_pi_T) * g(S_T)`` with both processes driven by the same
    Wiener increments of the numeraire measure.
    """
    T = spec.maturity
    n_dims = _n_segments(t, T, *_single_params(params))

    def sample(z):
        ls = np.zeros(z.shape[0])
        lp = np.zeros(z.shape[0])
        for k, (a, b, _) in enumerate(segments(t, T, *_single_params(params))):
            dls, dlp = _numeraire_increments(params, a, b, z[:, k])
            ls += dls
            lp += dlp
        return np.exp(-lp) * spec.payoff_single(S0 * np.exp(ls))

    return run_estimator(sample, seed, n_paths, n_dims, antithetic, workers)


@dataclass(frozen=True)
class BsmPiComparison:
    price_bsm: float
    price_pi: float
    difference: float
    sigma: float
    sigma_R: float
    r_f: float


def compare_bsm_vs_pi(S0: float, params: SingleAssetParams, spec: OptionSpec,
                      t: float = 0.0) -> BsmPiComparison:
    """Black-Scholes with volatility ``sigma`` next to the same formula with ``sigma_R``.

    Reported side by side; the two are not expected to agree unless ``r_f == mu``.
    """
    if not is_constant(*_single_params(params)):
        raise ValueError("comparison requires constant coefficients")
    mu, s, r = params.at(t)
    sr = deflator_pi(params, t) * s
    tau = spec.maturity - t
    c_bsm = black_scholes_call(S0, spec.strike, r, s, tau)
    c_pi = black_scholes_call(S0, spec.strike, r, abs(sr), tau)
    return BsmPiComparison(float(c_bsm), float(c_pi), float(c_pi - c_bsm), s, sr, r)


def martingale_check(values: np.ndarray, target: float, n_se: float = 3.0) -> tuple[McEstimate, bool]:
    """Sample mean of ``values`` against ``target`` within ``n_se`` standard errors."""
    v = np.asarray(values, dtype=float)
    est = McEstimate(float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)), v.size)
    return est, est.within(target, n_se)
