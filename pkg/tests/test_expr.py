import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmanifold.errors import EvaluationError, ExprSyntaxError, UnknownIdentifierError
from fmanifold.expr import eval_float, eval_jet, evaluate, is_constant, parse, to_source
from fmanifold.jets import jet_extract

CHART = ("u1", "u2")


def val(src, x=(0.7, 1.3), **kw):
    return eval_float(parse(src, CHART, **kw), x)


@pytest.mark.parametrize("src, expected", [
    ("1 + 2*3", 7.0),
    ("(1 + 2)*3", 9.0),
    ("-2^2", -4.0),            # ^ binds tighter than unary minus
    ("2^3^2", 512.0),          # right associative
    ("2^-1", 0.5),
    ("8^(1/3)", 2.0),
    ("1/2/4", 0.125),          # left associative
    ("u1*u2 - u2/u1", 0.7 * 1.3 - 1.3 / 0.7),
    ("exp(ln(u2))", 1.3),
    ("sqrt(u1)^2", 0.7),
    ("sin(u1)^2 + cos(u1)^2", 1.0),
    ("1.5e-1 + .5", 0.65),
])
def test_precedence_and_values(src, expected):
    assert val(src) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("src, kind, line, column", [
    ("u1 +", ExprSyntaxError, 1, 5),
    ("(u1", ExprSyntaxError, 1, 4),
    ("u1 $ 2", ExprSyntaxError, 1, 4),
    ("ln(u1))", ExprSyntaxError, 1, 7),
    ("", ExprSyntaxError, 1, 1),
    ("u1^u2", ExprSyntaxError, 1, 3),
    ("u3 + 1", UnknownIdentifierError, 1, 1),
    ("foo(u1)", UnknownIdentifierError, 1, 1),
    ("u1\n + zz", UnknownIdentifierError, 2, 4),
])
def test_errors_carry_location(src, kind, line, column):
    with pytest.raises(kind) as info:
        parse(src, CHART)
    assert (info.value.line, info.value.column) == (line, column)


def test_lax_variable_and_parameters():
    with pytest.raises(UnknownIdentifierError):
        parse("p + u1", CHART)
    e = parse("p + a*u1", CHART, allow_p=True, params=("a",))
    assert e.variables == ("u1", "u2", "p")
    assert eval_float(e, (2.0, 0.0), params={"a": 3.0}, p=1.0) == pytest.approx(7.0)
    assert is_constant(parse("a*2 + ln(3)", CHART, params=("a",)))
    assert not is_constant(parse("u1", CHART))


def test_evaluation_errors_name_the_subexpression_and_point():
    e = parse("1 + ln(u1 - 1)", CHART)
    with pytest.raises(EvaluationError) as info:
        eval_float(e, (0.5, 0.0))
    assert info.value.point == (0.5, 0.0) or list(info.value.point) == [0.5, 0.0]
    assert "ln" in str(info.value.expression)
    with pytest.raises(EvaluationError):
        eval_float(parse("1/(u1 - u2)", CHART), (1.0, 1.0))
    with pytest.raises(EvaluationError):
        eval_jet(parse("sqrt(u1)", CHART), (-1.0, 0.0), 2)


def test_jet_evaluation_matches_analytic_derivatives():
    e = parse("u1^2*u2 + exp(u2)", CHART)
    j = eval_jet(e, (0.5, 0.2), 3)
    assert j.value == pytest.approx(0.25 * 0.2 + math.exp(0.2))
    assert jet_extract(j, (1, 0)) == pytest.approx(2 * 0.5 * 0.2)
    assert jet_extract(j, (1, 1)) == pytest.approx(2 * 0.5)
    assert jet_extract(j, (0, 3)) == pytest.approx(math.exp(0.2))


def test_vectorized_float_evaluation():
    e = parse("u1*u2", CHART)
    out = evaluate(e, {"u1": np.array([1.0, 2.0]), "u2": np.array([3.0, 4.0])})
    np.testing.assert_allclose(out, [3.0, 8.0])


# -- printer round trip (property-based) ---------------------------------------

atoms = st.sampled_from(["u1", "u2", "2", "0.5", "3.25", "1e-3"])


def _compose(children):
    binary = st.tuples(children, st.sampled_from(["+", "-", "*", "/"]), children).map(
        lambda t: f"({t[0]}) {t[1]} ({t[2]})")
    unary = children.map(lambda s: f"-({s})")
    call = st.tuples(st.sampled_from(["exp", "sin", "cos"]), children).map(lambda t: f"{t[0]}({t[1]})")
    power = st.tuples(children, st.sampled_from(["2", "3", "(-1)", "(1/2)"])).map(
        lambda t: f"({t[0]})^{t[1]}")
    return binary | unary | call | power


sources = st.recursive(atoms, _compose, max_leaves=8)


@settings(max_examples=150, deadline=None)
@given(sources)
def test_to_source_round_trip(src):
    e = parse(src, CHART)
    text = to_source(e.root)
    again = parse(text, CHART)
    assert again.root == e.root
    assert to_source(again.root) == text
    x = (0.37, 1.21)
    try:
        a = eval_float(e, x)
    except EvaluationError:
        with pytest.raises(EvaluationError):
            eval_float(again, x)
        return
    b = eval_float(again, x)
    assert (math.isnan(a) and math.isnan(b)) or a == b
