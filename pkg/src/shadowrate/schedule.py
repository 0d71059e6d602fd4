"""Piecewise-constant parameter schedules.

A schedule value applies on ``[t_k, t_{k+1})``; the first value is extended to
the left of the first start time and the last value to the right of the last.
Market parameters are typed ``Param = float | Schedule`` throughout the package.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np


@dataclass(frozen=True)
class Schedule:
    starts: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        starts = tuple(float(s) for s in self.starts)
        values = tuple(float(v) for v in self.values)
        if not starts or len(starts) != len(values):
            raise ValueError("schedule needs equally many start times and values (at least one)")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("schedule start times must be strictly increasing")
        if not all(np.isfinite(starts)) or not all(np.isfinite(values)):
            raise ValueError("schedule entries must be finite")
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_records(cls, records: Sequence[dict]) -> "Schedule":
        """Build from ``[{"t_start": ..., "value": ...}, ...]`` as found in JSON configs."""
        rows = sorted(records, key=lambda r: float(r["t_start"]))
        return cls(tuple(r["t_start"] for r in rows), tuple(r["value"] for r in rows))

    def to_records(self) -> list[dict]:
        return [{"t_start": s, "value": v} for s, v in zip(self.starts, self.values)]

    def __call__(self, t: float) -> float:
        i = bisect.bisect_right(self.starts, t) - 1
        return self.values[max(i, 0)]

    def breakpoints(self, a: float, b: float) -> list[float]:
        return [s for s in self.starts if a < s < b]

    def integral(self, a: float, b: float) -> float:
        return integrate(self, a, b)

    def map(self, fn) -> "Schedule":
        return Schedule(self.starts, tuple(fn(v) for v in self.values))


Param = Union[float, Schedule]


def value_at(p: Param, t: float) -> float:
    return p(t) if isinstance(p, Schedule) else float(p)


def is_constant(*params: Param) -> bool:
    return all(not isinstance(p, Schedule) or len(set(p.values)) == 1 for p in params)


def segment_values(p: Param) -> tuple[float, ...]:
    """All distinct levels a parameter takes (used for invariant checks)."""
    return p.values if isinstance(p, Schedule) else (float(p),)


def segments(a: float, b: float, *params: Param) -> Iterator[tuple[float, float, tuple[float, ...]]]:
    """Split ``[a, b]`` into pieces on which every parameter is constant.

    Yields ``(t0, t1, values)`` with ``values`` evaluated at ``t0``.
    """
    if b < a:
        raise ValueError("segment end precedes start")
    cuts = {a, b}
    for p in params:
        if isinstance(p, Schedule):
            cuts.update(p.breakpoints(a, b))
    grid = sorted(cuts)
    for t0, t1 in zip(grid, grid[1:]):
        yield t0, t1, tuple(value_at(p, t0) for p in params)


def integrate(p: Param, a: float, b: float) -> float:
    """Exact integral of a piecewise-constant parameter over ``[a, b]``."""
    return sum((t1 - t0) * v for t0, t1, (v,) in segments(a, b, p))


def refine_grid(grid: Sequence[float], *params: Param) -> np.ndarray:
    """Union of ``grid`` with every schedule breakpoint strictly inside it."""
    grid = np.asarray(grid, dtype=float)
    cuts = set(grid.tolist())
    for p in params:
        if isinstance(p, Schedule):
            cuts.update(p.breakpoints(grid[0], grid[-1]))
    return np.array(sorted(cuts))


def as_param(raw) -> Param:
    """Coerce a JSON value (number or list of records) into a parameter."""
    if isinstance(raw, Schedule):
        return raw
    if isinstance(raw, (list, tuple)):
        return Schedule.from_records(raw)
    return float(raw)


def param_to_json(p: Param):
    return p.to_records() if isinstance(p, Schedule) else p
