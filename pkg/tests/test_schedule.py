import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shadowrate.schedule import Schedule, integrate, is_constant, refine_grid, segments, value_at


def test_lookup_is_left_closed():
    s = Schedule((0.0, 1.0, 2.0), (1.0, 2.0, 3.0))
    assert s(-1) == 1.0 and s(0) == 1.0 and s(0.999) == 1.0
    assert s(1.0) == 2.0 and s(5.0) == 3.0


def test_validation():
    with pytest.raises(ValueError):
        Schedule((1.0, 0.0), (1.0, 2.0))
    with pytest.raises(ValueError):
        Schedule((), ())
    with pytest.raises(ValueError):
        Schedule((0.0,), (float("nan"),))


def test_records_sorted_on_load():
    s = Schedule.from_records([{"t_start": 1, "value": 2}, {"t_start": 0, "value": 1}])
    assert s.starts == (0.0, 1.0)
    assert Schedule.from_records(s.to_records()) == s


def test_segments_split_at_breakpoints():
    a = Schedule((0.0, 0.5), (1.0, 2.0))
    b = Schedule((0.0, 0.25), (3.0, 4.0))
    got = list(segments(0.0, 1.0, a, b, 7.0))
    assert [(t0, t1) for t0, t1, _ in got] == [(0.0, 0.25), (0.25, 0.5), (0.5, 1.0)]
    assert got[1][2] == (1.0, 4.0, 7.0)


@given(st.lists(st.floats(0.01, 2.0), min_size=1, max_size=5), st.lists(st.floats(-1, 1), min_size=5, max_size=5),
       st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_integral_matches_fine_riemann_sum(widths, vals, a, b):
    a, b = min(a, b), max(a, b)
    starts = np.cumsum([0.0] + widths[:-1])
    s = Schedule(tuple(starts), tuple(vals[:len(starts)]))
    grid = np.linspace(a, b, 20001)
    mid = 0.5 * (grid[1:] + grid[:-1])
    riemann = float(np.sum([s(t) for t in mid]) * (b - a) / 20000) if b > a else 0.0
    assert integrate(s, a, b) == pytest.approx(riemann, abs=2 * len(starts) * abs(max(vals, key=abs)) * (b - a) / 20000 + 1e-12)


def test_constant_helpers():
    assert is_constant(1.0, Schedule((0.0, 1.0), (2.0, 2.0)))
    assert not is_constant(Schedule((0.0, 1.0), (2.0, 3.0)))
    assert value_at(0.3, 10.0) == 0.3
    np.testing.assert_allclose(refine_grid([0, 1], Schedule((0.0, 0.3), (1.0, 2.0))), [0, 0.3, 1])
