import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from weylprod.expr import DomainError, ParseError, ScalarField, parse, var

NV = 4


def _leaf():
    return st.one_of(
        st.integers(1, NV).map(lambda i: f"x{i}"),
        st.integers(0, 9).map(str),
        st.sampled_from(["0.5", "2.25", "1e-3"]),
    )


def _grow(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*"), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        st.tuples(children, st.integers(0, 3)).map(lambda t: f"({t[0]})^{t[1]}"),
        st.tuples(st.sampled_from(["sin", "cos"]), children).map(lambda t: f"{t[0]}({t[1]})"),
        children.map(lambda s: f"-{s}"),
    )


sources = st.recursive(_leaf(), _grow, max_leaves=8)
points = st.lists(st.floats(-1.5, 1.5), min_size=NV, max_size=NV)


@settings(max_examples=200, deadline=None)
@given(sources)
def test_print_parse_round_trip(src):
    f = parse(src, NV)
    assert parse(str(f), NV) == f


@settings(max_examples=100, deadline=None)
@given(sources, points)
def test_printed_form_evaluates_identically(src, p):
    f = parse(src, NV)
    assert parse(str(f), NV).eval(p) == pytest.approx(f.eval(p), rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(sources, st.integers(1, NV), st.integers(1, NV), points)
def test_mixed_partials_commute(src, i, j, p):
    f = parse(src, NV)
    a = f.diff(i).diff(j).eval(p)
    b = f.diff(j).diff(i).eval(p)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


def _sympy(src):
    xs = sp.symbols("x1:5")
    return sp.sympify(src.replace("^", "**").replace("ln", "log"), locals={f"x{i+1}": x for i, x in enumerate(xs)}), xs


@pytest.mark.parametrize(
    "src",
    [
        "x1*x3",
        "exp(x1)*sin(x3) + x2^3*x4",
        "ln(2 + x1^2)/(1 + x4^2)",
        "cos(x1*x2 - x3)^2 - 3*x4^-2",
        "-x1^2 + 0.25*exp(-x2)*x3",
    ],
)
def test_jet_matches_sympy(src, rng):
    f = parse(src, 4)
    expr, xs = _sympy(src)
    grad = [sp.lambdify(xs, sp.diff(expr, x)) for x in xs]
    hess = [[sp.lambdify(xs, sp.diff(expr, x, y)) for y in xs] for x in xs]
    for p in 0.5 + rng.random((5, 4)):
        val, g, h = f.jet(p, 2)
        assert val == pytest.approx(float(expr.subs(dict(zip(xs, p)))), rel=1e-12)
        assert g == pytest.approx([d(*p) for d in grad], rel=1e-11, abs=1e-12)
        assert h == pytest.approx(np.array([[d(*p) for d in row] for row in hess]), rel=1e-10, abs=1e-11)


def test_derivative_matches_central_differences(rng):
    f = parse("exp(x1*x2)*cos(x3) + ln(3 + x4)", 4)
    p = rng.random(4)
    h = 1e-6
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        fd = (f.eval(p + e) - f.eval(p - e)) / (2 * h)
        assert f.diff(i + 1).eval(p) == pytest.approx(fd, rel=1e-7)


def test_example_values():
    assert parse("x1*x3", 4).eval([2, 0, 5, 0]) == 10.0
    assert parse("x1^2", 4).diff(1).eval([3, 0, 0, 0]) == 6.0
    assert parse("exp(0)", 1).eval([0.0]) == 1.0
    assert parse("2^-1", 1).eval([0.0]) == 0.5


def test_constant_folding_and_zero():
    f = parse("x1*x3", 4)
    assert f.diff(2).is_zero()
    assert f.diff(1).diff(1).is_zero()
    assert str(f.diff(1)) == "x3"
    assert f.variables() == frozenset({1, 3})
    assert ScalarField.constant(0.0, 3).is_zero()
    assert var(2, 3).eval([0, 7, 0]) == 7


@pytest.mark.parametrize(
    "src, offset, fragment",
    [
        ("x1 + ", 5, "end of input"),
        ("x1 * y", 5, "unknown identifier"),
        ("x5", 0, "out of range"),
        ("x1 $ 2", 3, "unexpected character"),
        ("sin x1", 4, "expected '('"),
        ("x1^1.5", 3, "integer"),
        ("(x1", 3, "expected ')'"),
        ("x1 x2", 3, "unexpected token"),
    ],
)
def test_parse_errors_carry_offsets(src, offset, fragment):
    with pytest.raises(ParseError) as exc:
        parse(src, 4)
    assert exc.value.offset == offset
    assert fragment in str(exc.value)


def test_offsets_are_bytes():
    with pytest.raises(ParseError) as exc:
        parse("x1 + é", 2)
    assert exc.value.offset == 5


@pytest.mark.parametrize("src, p", [("1/x1", [0.0]), ("ln(x1)", [0.0]), ("ln(x1)", [-1.0]), ("exp(x1)", [1e4])])
def test_domain_errors(src, p):
    f = parse(src, 1)
    with pytest.raises(DomainError) as exc:
        f.eval(p)
    assert list(exc.value.point) == p
    with pytest.raises(DomainError):
        f.jet(p, 2)


def test_field_is_immutable():
    f = parse("x1", 1)
    with pytest.raises(AttributeError):
        f.nvars = 2
    assert math.isclose(f(np.array([0.25])), 0.25)
