"""Historical price ingestion and rolling-window parameter estimates.

Inputs are CSV files: prices with header ``date,close`` and riskless yields with
header ``date,annual_yield``.  Estimates use arithmetic daily returns, unbiased
sample moments, and convert annual yields to daily rates by dividing by 252.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .companion import PerpetualSpec, perpetual_price
from .errors import NonPositivePrice, ParseError, WindowTooLong
from .market import SingleAssetParams
from .monte_carlo import simulate_p_single

TRADING_DAYS = 252


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple[dt.date, ...]
    closes: np.ndarray
    symbol: str = ""

    def __post_init__(self) -> None:
        closes = np.asarray(self.closes, dtype=float)
        if len(self.dates) != closes.size:
            raise ValueError("dates and closes differ in length")
        if np.any(closes <= 0):
            raise NonPositivePrice("closes must be positive")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ParseError("dates must be strictly increasing")
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "closes", closes)

    def __len__(self) -> int:
        return self.closes.size

    def returns(self) -> np.ndarray:
        return self.closes[1:] / self.closes[:-1] - 1.0


@dataclass(frozen=True)
class RollingEstimate:
    date: dt.date
    mu_hat: float
    sigma_hat: float
    delta_hat: float
    window: int

    @property
    def flagged(self) -> bool:
        """True when the window is degenerate and ``delta_hat`` is undefined."""
        return not (self.sigma_hat > 0 and math.isfinite(self.delta_hat))


def _read_rows(path, columns: tuple[str, str]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", 1) from None
        try:
            idx = [header.index(c) for c in columns]
        except ValueError:
            raise ParseError(f"header must contain {','.join(columns)}", 1) from None
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                day = dt.date.fromisoformat(row[idx[0]].strip())
                value = float(row[idx[1]])
            except (IndexError, ValueError) as exc:
                raise ParseError(str(exc), line_no) from None
            yield line_no, day, value


def _check_order(prev: dt.date | None, day: dt.date, line_no: int) -> None:
    if prev is None:
        return
    if day == prev:
        raise ParseError(f"duplicate date {day}", line_no)
    if day < prev:
        raise ParseError(f"date {day} out of order", line_no)


def load_series(path, symbol: str | None = None) -> PriceSeries:
    """Read a ``date,close`` CSV; row numbers in errors count the header as row 1."""
    dates, closes = [], []
    for line_no, day, close in _read_rows(path, ("date", "close")):
        if not close > 0:
            raise NonPositivePrice(f"close {close} is not positive", line_no)
        _check_order(dates[-1] if dates else None, day, line_no)
        dates.append(day)
        closes.append(close)
    if not dates:
        raise ParseError("no data rows", 1)
    return PriceSeries(tuple(dates), np.array(closes), symbol or Path(path).stem)


def load_yields(path) -> dict[dt.date, float]:
    """Read a ``date,annual_yield`` CSV into an ordered mapping."""
    out: dict[dt.date, float] = {}
    prev = None
    for line_no, day, y in _read_rows(path, ("date", "annual_yield")):
        _check_order(prev, day, line_no)
        out[day] = y
        prev = day
    return out


def align_yields(dates: Sequence[dt.date], yields: Mapping[dt.date, float]) -> np.ndarray:
    """Annual yields on ``dates``, forward-filled from the latest earlier observation."""
    known = sorted(yields)
    out = np.empty(len(dates))
    j = -1
    for i, day in enumerate(dates):
        while j + 1 < len(known) and known[j + 1] <= day:
            j += 1
        if j < 0:
            raise ParseError(f"no yield on or before {day}")
        out[i] = yields[known[j]]
    return out


def rolling_estimates(series: PriceSeries, window: int, r_f) -> list[RollingEstimate]:
    """Trailing-window drift, volatility and ``delta = 2 r_daily / sigma**2``.

    ``r_f`` is an annual yield: a constant, an array aligned with ``series.dates``,
    or a date-keyed mapping (forward-filled).  One estimate is produced for
    every date that has ``window`` returns behind it.
    """
    if window < 2:
        raise ValueError("window must hold at least two returns")
    if len(series) < window + 1:
        raise WindowTooLong(f"series of {len(series)} prices is too short for window {window}")
    if isinstance(r_f, Mapping):
        annual = align_yields(series.dates, r_f)
    else:
        annual = np.broadcast_to(np.asarray(r_f, dtype=float), (len(series),))
    rets = series.returns()
    win = np.lib.stride_tricks.sliding_window_view(rets, window)
    mu = win.mean(axis=1)
    sd = win.std(axis=1, ddof=1)
    r_daily = annual[window:] / TRADING_DAYS
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(sd > 0, 2.0 * r_daily / np.square(sd), np.nan)
    return [RollingEstimate(series.dates[window + i], float(mu[i]), float(sd[i]), float(delta[i]), window)
            for i in range(mu.size)]


def business_days(n: int, start: dt.date = dt.date(2020, 1, 1)) -> tuple[dt.date, ...]:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    days = np.busday_offset(first, np.arange(n))
    return tuple(d.astype(dt.date) for d in days)


def synthesize_series(params: SingleAssetParams, n_days: int, seed: int, S0: float = 1.0,
                      symbol: str = "SYN", start: dt.date = dt.date(2020, 1, 1)) -> PriceSeries:
    """Daily exact log-normal path; ``params`` are per-day drift and volatility."""
    if n_days < 2:
        raise ValueError("n_days must be at least 2")
    batch = simulate_p_single(S0, params, float(n_days - 1), n_days - 1, 1, seed)
    return PriceSeries(business_days(n_days, start), batch.paths[0], symbol)


def synthesize_pair(params: SingleAssetParams, n_days: int, seed: int, gamma: float,
                    S0: float = 1.0, symbol: str = "SYN") -> tuple[PriceSeries, PriceSeries]:
    """Stock path plus its perpetual derivative ``S**gamma`` on the same increments."""
    stock = synthesize_series(params, n_days, seed, S0, symbol)
    spec = PerpetualSpec.from_single(params, gamma)
    t = np.arange(n_days, dtype=float)
    companion = np.array([perpetual_price(spec, ti, si) for ti, si in zip(t, stock.closes)])
    return stock, PriceSeries(stock.dates, companion, f"{symbol}^{gamma:g}")
