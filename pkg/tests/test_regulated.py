import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mdde.regulated import (Constant, Joined, Piecewise, PiecewiseLinear, Product,
                            RegulatedFnError, Restricted, Shifted, StepFunction, from_expr)


def step_up_at_one():
    return StepFunction([0.0, 1.0, 2.0], [0.0, 2.0])


def test_value_at_is_left_value():
    f = step_up_at_one()
    assert f.value_at(1.0) == 0.0
    assert f.right_limit(1.0) == 2.0
    assert f.value_at(1.5) == 2.0
    assert f.value_at(0.0) == 0.0


def test_identity_and_cubic():
    assert from_expr("t", 0.0).value_at(5.0) == 5.0
    g = from_expr("2*t^3", 2.0)
    assert g.value_at(2.0) == 16.0
    assert g.right_limit(2.0) == 16.0


def test_right_limit_piecewise_bodies():
    f = Piecewise([0.0, 1.0, 2.0], ["t", "t + 3"])
    assert f.value_at(1.0) == 1.0
    assert f.right_limit(1.0) == 4.0
    assert f.jump_points == [(1.0, 4.0)]


def test_right_limit_fails_at_finite_end():
    with pytest.raises(RegulatedFnError):
        step_up_at_one().right_limit(2.0)


def test_out_of_domain():
    with pytest.raises(RegulatedFnError):
        step_up_at_one().value_at(2.5)
    with pytest.raises(RegulatedFnError):
        step_up_at_one()(np.array([-1.0, 0.5]))


def test_breakpoints_in():
    assert from_expr("t^2 + 1", 0.0, 10.0).breakpoints_in(2, 5) == []
    f = StepFunction([0, 1, 3, 7, 10], [0, 1, 2, 3])
    assert f.breakpoints_in(2, 8) == [3.0, 7.0]
    assert f.breakpoints_in(3, 3) == [3.0]
    with pytest.raises(RegulatedFnError):
        f.breakpoints_in(5, 4)


def test_construction_checks():
    with pytest.raises(RegulatedFnError):
        StepFunction([0, 0, 1], [1, 2])
    with pytest.raises(RegulatedFnError):
        StepFunction([0, float("nan")], [1])
    with pytest.raises(RegulatedFnError):
        Piecewise([0.0, 1.0], ["log(t - 0.5)"])  # domain error on the sample grid
    with pytest.raises(RegulatedFnError):
        Piecewise([0.0, 1.0], ["1/(t - 1)"])  # no finite left value at the break


def test_left_continuity_validator_rejects_jump_inside_body():
    # the second body jumps at 2 but its segment is declared as (1, 3]
    with pytest.raises(RegulatedFnError):
        Piecewise([0.0, 2.0, 3.0], ["piecewise(t < 2 - 1e-9, 0, 1)", "t"])


def test_from_expr_splits_at_discontinuities():
    f = from_expr("chi(1, 2) + piecewise(t <= 3, 0, 5)", 0.0, 10.0)
    assert f.interior_breaks.tolist() == [1.0, 2.0, 3.0]
    assert f.value_at(1.0) == 0.0 and f.right_limit(1.0) == 1.0
    assert f.value_at(2.0) == 1.0 and f.right_limit(2.0) == 0.0
    assert f.value_at(3.0) == 0.0 and f.right_limit(3.0) == 5.0


def test_piecewise_linear_with_jump():
    f = PiecewiseLinear([0.0, 1.0, 2.0], [0.0, 1.0, 0.0], [0.0, 3.0, 0.0])
    assert f.value_at(0.5) == 0.5
    assert f.value_at(1.0) == 1.0
    assert f.right_limit(1.0) == 3.0
    assert f.value_at(1.5) == 1.5


def test_views():
    f = from_expr("t^2", 0.0, 4.0)
    s = Shifted(f, 1.0)
    assert s.domain_start == 1.0 and s.value_at(3.0) == 4.0
    prod = Product(f, step_up_at_one())
    assert prod.domain_end == 2.0
    assert prod.value_at(1.0) == 0.0 and prod.right_limit(1.0) == 2.0
    j = Joined(Constant(1.0, 0, 1), Constant(2.0, 1, 3))
    assert j.value_at(1.0) == 1.0 and j.value_at(2.0) == 2.0
    with pytest.raises(RegulatedFnError):
        Joined(Constant(1.0, 0, 1), Constant(2.0, 1.5, 3))
    r = Restricted(f, 1.0, 2.0)
    assert (r.domain_start, r.domain_end) == (1.0, 2.0) and r.value_at(2.0) == 4.0
    with pytest.raises(RegulatedFnError):
        Restricted(f, -1.0, 2.0)


def test_to_dict():
    d = from_expr("chi(1, 2)", 0.0).to_dict()
    assert d["domain"] == [0.0, "inf"]
    assert d["breakpoints"] == [1.0, 2.0]
    assert d["jumps"] == [[1.0, 1.0], [2.0, 0.0]]


_breaks = st.lists(st.floats(0.01, 10), min_size=1, max_size=5, unique=True).map(
    lambda xs: [0.0] + sorted(xs))


@given(_breaks, st.data())
def test_sampled_left_continuity(breaks, data):
    vals = data.draw(st.lists(st.floats(-5, 5), min_size=len(breaks) - 1,
                              max_size=len(breaks) - 1))
    f = Piecewise(breaks, [f"{v!r} + t^2" for v in vals])
    for s in breaks[1:]:
        v = f.value_at(s)
        assert abs(f.value_at(s - 1e-9 * max(1, s)) - v) <= 1e-7 * max(1.0, abs(v))


@given(_breaks, st.data())
def test_right_limit_matches_nearby_values(breaks, data):
    vals = data.draw(st.lists(st.floats(-5, 5), min_size=len(breaks) - 1,
                              max_size=len(breaks) - 1))
    f = Piecewise(breaks, [f"{v!r} + sin(t)" for v in vals])
    for s in breaks[:-1]:
        gap = min(b - s for b in breaks if b > s)
        h = 1e-7 * gap
        assert abs(f.right_limit(s) - f.value_at(s + h)) <= 2 * h


@given(_breaks, st.floats(0, 10), st.floats(0, 10))
def test_breakpoints_in_is_subset(breaks, a, b):
    a, b = min(a, b), max(a, b)
    f = StepFunction(breaks, np.arange(len(breaks) - 1))
    got = f.breakpoints_in(a, b)
    assert set(got) <= set(breaks[1:-1])
    assert got == sorted(x for x in breaks[1:-1] if a <= x <= b)


def test_guard_with_constant_on_left_is_left_continuous():
    f = from_expr("piecewise(2 < t, t, 0)", 0.0, 5.0)
    assert f.value_at(2.0) == 0.0 and f.right_limit(2.0) == 2.0
