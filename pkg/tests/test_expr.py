import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mdde import expr as E


def test_parse_piecewise_power_with_indicator():
    node = E.parse("t^4 * chi(4, inf) * ae_except_rationals")
    assert E.has_null_exceptions(node)
    assert E.discontinuities(node) == (4.0,)
    assert E.evaluate(node, 5.0) == 625.0
    assert E.evaluate(node, 3.0) == 0.0


def test_parse_zero_and_rational():
    assert E.parse("0") == E.Num(0.0)
    assert E.evaluate("1/(t^2)", 3.0) == pytest.approx(1 / 9, rel=1e-15)


def test_eval_examples():
    assert E.evaluate("t^4 * ae_except_rationals", 2.0) == 16.0
    assert E.evaluate("chi(4, inf)", 3.0) == 0.0
    assert E.evaluate("1/(t*(t-1))", 3.0) == pytest.approx(1 / 6, rel=1e-15)


def test_ae_marker_is_one_even_at_rationals():
    assert np.all(E.evaluate("ae_except_rationals", np.array([0.0, 0.5, 1.0, 2.0])) == 1.0)


def test_chi_is_left_open_right_closed():
    f = E.parse("chi(1, 2)")
    assert E.evaluate(f, 1.0) == 0.0
    assert E.evaluate(f, 2.0) == 1.0
    assert E.evaluate(f, 1.5) == 1.0
    assert E.evaluate("chi(-inf, 0)", -1e300) == 1.0


def test_precedence_and_associativity():
    assert E.evaluate("2^3^2", 0.0) == 512.0
    assert E.evaluate("-2^2", 0.0) == -4.0
    assert E.evaluate("1 - 2 - 3", 0.0) == -4.0
    assert E.evaluate("8 / 4 / 2", 0.0) == 1.0
    assert E.evaluate("2 * -t", 3.0) == -6.0
    assert E.evaluate("2^-1", 0.0) == 0.5


def test_guards_tie_to_left_branch():
    f = E.parse("piecewise(t <= 1, 10, t > 1 and t < 3, 20, 30)")
    assert E.evaluate(f, 1.0) == 10.0
    assert E.evaluate(f, 2.0) == 20.0
    assert E.evaluate(f, 3.0) == 20.0  # tie goes to the smaller-t side
    assert E.evaluate(f, 4.0) == 30.0
    g = E.parse("piecewise(t > 2, 1, 0)")
    assert E.evaluate(g, 2.0) == 0.0
    assert E.discontinuities(f) == (1.0, 3.0)


def test_guards_with_parentheses_and_not():
    f = E.parse("piecewise(not (t > 1 or t <= -1), 1, 0)")
    assert E.evaluate(f, np.array([-2.0, 0.0, 2.0])).tolist() == [0.0, 1.0, 0.0]
    g = E.parse("piecewise((t) < 1, (t + 1), 5)")
    assert E.evaluate(g, 0.0) == 1.0


@pytest.mark.parametrize("text, cls", [
    ("t +", E.ExprSyntaxError),
    ("foo(t)", E.UnknownIdentifierError),
    ("x", E.UnknownIdentifierError),
    ("sin(t, 2)", E.ArityError),
    ("chi(1)", E.ArityError),
    ("chi(1, 2, 3)", E.ArityError),
    ("inf", E.ExprSyntaxError),
    ("chi(t, 2)", E.ExprSyntaxError),
    ("(1 + 2", E.ExprSyntaxError),
    ("1 2", E.ExprSyntaxError),
    ("piecewise(t < 1, 2)", E.ArityError),
])
def test_syntax_errors(text, cls):
    with pytest.raises(cls):
        E.parse(text)


def test_error_position_and_expected_set():
    with pytest.raises(E.ExprSyntaxError) as info:
        E.parse("1 +\n  * t")
    err = info.value
    assert (err.line, err.column) == (2, 3)
    assert err.offset == 6
    assert "number" in err.expected


def test_error_byte_offset_counts_utf8():
    with pytest.raises(E.ExprSyntaxError) as info:
        E.parse("1 + é")
    assert info.value.offset == 4
    assert info.value.byte_offset == 4
    with pytest.raises(E.ExprSyntaxError) as info:
        E.parse("é")
    assert info.value.byte_offset == 0


@pytest.mark.parametrize("text, t, fragment", [
    ("1/(t-1)", 1.0, "t - 1"),
    ("log(t)", 0.0, "log(t)"),
    ("sqrt(t - 2)", 1.0, "sqrt"),
    ("t^0.5", -1.0, "t^0.5"),
])
def test_domain_errors_name_subexpression(text, t, fragment):
    with pytest.raises(E.DomainError) as info:
        E.evaluate(text, t)
    assert fragment in str(info.value)


def test_evaluate_is_deterministic():
    f = E.parse("exp(sin(t)) * cos(t)^2 + abs(t - 3)")
    ts = np.linspace(-5, 5, 101)
    a = E.evaluate(f, ts)
    b = E.evaluate(f, ts)
    assert a.tobytes() == b.tobytes()


# -- round trip over a generated grammar corpus

_num = st.sampled_from(["0", "1", "2", "0.5", "3.25", "1e-3", "10"])
_bound = st.sampled_from(["0", "1", "2.5", "-1", "inf", "-inf", "(1 + 2)"])


def _exprs():
    leaf = st.one_of(_num, st.just("t"), st.just("ae_except_rationals"))

    def extend(children):
        return st.one_of(
            st.tuples(children, st.sampled_from(["+", "-", "*", "/", "^"]), children)
            .map(lambda x: f"{x[0]} {x[1]} {x[2]}"),
            children.map(lambda x: f"-{x}"),
            children.map(lambda x: f"({x})"),
            st.tuples(st.sampled_from(E.FUNCTIONS), children).map(lambda x: f"{x[0]}({x[1]})"),
            st.tuples(_bound, _bound).map(lambda x: f"chi({x[0]}, {x[1]})"),
            st.tuples(children, st.sampled_from(E.RELOPS), children, children, children)
            .map(lambda x: f"piecewise({x[0]} {x[1]} {x[2]}, {x[3]}, {x[4]})"),
            st.tuples(children, children)
            .map(lambda x: f"piecewise(not t < 0 and (t >= 1 or t > 5), {x[0]}, {x[1]})"),
        )
    return st.recursive(leaf, extend, max_leaves=12)


@given(_exprs())
def test_parse_print_parse_round_trip(text):
    node = E.parse(text)
    printed = E.to_text(node)
    assert E.parse(printed) == node
    assert E.to_text(E.parse(printed)) == printed


@given(_exprs(), st.floats(-3, 3))
def test_printed_form_evaluates_identically(text, t):
    node = E.parse(text)
    again = E.parse(E.to_text(node))
    try:
        v = E.evaluate(node, t)
    except E.DomainError:
        with pytest.raises(E.DomainError):
            E.evaluate(again, t)
        return
    w = E.evaluate(again, t)
    assert (math.isnan(v) and math.isnan(w)) or v == w


@pytest.mark.parametrize("text, left, right", [
    ("piecewise(t <= 2, 1, 0)", 1.0, 0.0),
    ("piecewise(t < 2, 1, 0)", 1.0, 0.0),
    ("piecewise(t > 2, 1, 0)", 0.0, 1.0),
    ("piecewise(2 < t, 1, 0)", 0.0, 1.0),
    ("piecewise(2 >= t, 1, 0)", 1.0, 0.0),
    ("chi(2, 3)", 0.0, 1.0),
    ("chi(1, 2)", 1.0, 0.0),
])
def test_ties_follow_left_continuity_and_right_side_mode(text, left, right):
    node = E.parse(text)
    t = np.array([2.0])
    assert E.compile_expr(node)(t)[0] == left
    assert E.compile_expr(node, "right")(t)[0] == right
    assert E.evaluate(node, 2.0 - 1e-9) == left
    assert E.evaluate(node, 2.0 + 1e-9) == right
