import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conewave.expr import (
    BinOp,
    EvaluationError,
    ExprSyntaxError,
    Num,
    UnknownIdentifierError,
    Var,
    check_vars,
    evaluate,
    evaluate_text,
    free_vars,
    parse,
    unparse,
)


def test_precedence_and_associativity():
    assert evaluate_text("-2^2") == -4.0
    assert evaluate_text("2^3^2") == 512.0
    assert evaluate_text("1-2-3") == -4.0
    assert evaluate_text("8/4/2") == 1.0
    assert evaluate_text("2*3+4*5") == 26.0
    assert evaluate_text("2^-1") == 0.5


def test_example_data_values():
    u0 = parse("x*(1-x)^2/10")
    assert evaluate(u0, x=1 / 3) == pytest.approx(2 / 135, rel=1e-15)
    assert evaluate(u0, x=0.0) == 0.0
    assert evaluate_text("abs(u)^2", u=-0.5) == 0.25


def test_pi_and_functions():
    assert evaluate_text("sin(pi/2)") == 1.0
    assert evaluate_text("max(1, 2) + min(3, -1)") == 1.0
    assert evaluate_text("pow(2, 10)") == 1024.0
    assert evaluate_text("atan(1)") == pytest.approx(math.pi / 4)


def test_array_evaluation_broadcasts():
    t = np.linspace(0, 1, 5)[:, None]
    x = np.linspace(0, 1, 3)[None, :]
    out = evaluate(parse("t^3"), t=t, x=x)
    assert out.shape == (5, 3)
    assert np.allclose(out[:, 0], out[:, 2])


def test_syntax_error_reports_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse("x*(1-")
    assert info.value.offset == 5
    with pytest.raises(ExprSyntaxError):
        parse("1 2")
    with pytest.raises(ExprSyntaxError):
        parse("sin(1, 2)")


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("x + y")
    assert info.value.name == "y"


@pytest.mark.parametrize("text,env", [
    ("1/x", {"x": 0.0}),
    ("log(x)", {"x": 0.0}),
    ("sqrt(x)", {"x": -1.0}),
    ("x^0.5", {"x": -2.0}),
    ("0^(-1)", {}),
    ("exp(x)", {"x": 1e4}),
])
def test_evaluation_errors(text, env):
    with pytest.raises(EvaluationError):
        evaluate_text(text, **env)


def test_array_error_is_raised_not_nan():
    with pytest.raises(EvaluationError):
        evaluate(parse("1/x"), x=np.array([1.0, 0.0]))


def test_free_vars_and_check():
    e = parse("t*x + u")
    assert free_vars(e) == {"t", "x", "u"}
    assert check_vars(parse("t*x"), {"t", "x"})
    assert not check_vars(e, {"t", "x"})


def test_unparse_is_explicit():
    e = parse("1+2*x")
    assert e == BinOp("+", Num(1.0), BinOp("*", Num(2.0), Var("x")))
    assert unparse(e) == "(1.0 + (2.0 * x))"


# --- fuzzing ---------------------------------------------------------------

_leaf = st.one_of(
    st.sampled_from(["t", "x", "u", "pi"]),
    st.floats(min_value=0, max_value=1e3, allow_nan=False).map(repr),
)


def _combine(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*", "/", "^"]), children).map(lambda a: f"({a[0]}{a[1]}{a[2]})"),
        children.map(lambda a: f"-{a}"),
        st.tuples(st.sampled_from(["sin", "cos", "abs", "atan"]), children).map(lambda a: f"{a[0]}({a[1]})"),
    )


_exprs = st.recursive(_leaf, _combine, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(_exprs)
def test_unparse_roundtrip(text):
    e = parse(text)
    assert parse(unparse(e)) == e


@settings(max_examples=200, deadline=None)
@given(_exprs, st.floats(-2, 2), st.floats(0, 1), st.floats(0, 3))
def test_evaluation_is_finite_or_raises(text, u, x, t):
    e = parse(text)
    try:
        v = evaluate(e, t=t, x=x, u=u)
    except EvaluationError:
        return
    assert math.isfinite(v)
    assert evaluate(parse(unparse(e)), t=t, x=x, u=u) == v


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="tx u0123456789.+-*/^()e,sinabcpq", max_size=20))
def test_garbage_never_crashes(text):
    try:
        parse(text)
    except (ExprSyntaxError, UnknownIdentifierError):
        pass
