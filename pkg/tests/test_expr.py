import math

import numpy as np
import pytest
from conftest import antideriv_class, central_difference, same_canonical, smooth_exprs
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from invopt.expr import (
    Add,
    Const,
    Domain,
    DomainError,
    Func,
    NonDifferentiableError,
    ParseError,
    Pow,
    QuadratureError,
    Var,
    abs_,
    antideriv,
    canonical,
    cos,
    diff,
    evaluate,
    evaluate_many,
    is_smooth,
    lambdify,
    match_affine,
    parse,
    parse_raw,
    proportional,
    quad,
    sign,
    sin,
    split_terms,
    sqrt,
    substitute,
    to_string,
    var_power_factor,
)
from invopt.expr.numeric import integral_from_zero

X1, X2, X3 = Var(1), Var(2), Var(3)
PROPERTY = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


# ---------------------------------------------------------------- parsing


def test_parse_polynomial_maps_to_sum_of_power_and_variable():
    e = parse("x1^2 + x2")
    assert e == canonical(Add((Pow(X1, 2), X2)))
    raw = parse_raw("x1^2 + x2")
    assert isinstance(raw, Add) and raw.terms == (Pow(X1, 2), X2)


def test_parse_function_call():
    assert parse_raw("sin(x2)") == Func("sin", X2)


@pytest.mark.parametrize("text", ["x1^(1/3)", "x1^0.5", "x2^(2/3)"])
def test_parse_rejects_disallowed_exponents(text):
    with pytest.raises(ParseError, match="disallowed exponent"):
        parse(text)


def test_parse_half_exponent_is_sqrt():
    assert parse("(1 + x2^2)^(1/2)") == parse("sqrt(1 + x2^2)")


@pytest.mark.parametrize(
    "text, message",
    [("x1 + ", "unexpected end"), ("x4", "unknown identifier"), ("tan(x1)", "disallowed function"),
     ("x1 $ 2", "unexpected character"), ("(x1", "expected"), ("", "empty")],
)
def test_parse_errors_are_reported_with_position(text, message):
    with pytest.raises(ParseError, match=message) as info:
        parse(text)
    assert info.value.position >= 0


@pytest.mark.parametrize("text", ["1/0", "x1/(x2 - x2)", "sqrt(-1)"])
def test_parse_wraps_simplification_failures(text):
    with pytest.raises(ParseError):
        parse(text)


def test_whitespace_is_insignificant():
    assert parse("  x1 *x2+ sin( x2 ) ") == parse("x1*x2+sin(x2)")


@given(smooth_exprs())
@PROPERTY
def test_parse_print_parse_is_idempotent(e):
    once = parse(to_string(e))
    assert parse(to_string(once)) == once
    assert same_canonical(once, e)


# ------------------------------------------------------------- evaluation


@pytest.mark.parametrize(
    "text, x, value",
    [("x1^2 + x2", (2, 3), 7.0), ("sin(x2)", (0, 0), 0.0), ("x2*sqrt(3*(1 + x2^2))", (0, 1), math.sqrt(6))],
)
def test_evaluate_examples(text, x, value):
    assert evaluate(parse(text), x) == pytest.approx(value, abs=1e-14)


def test_sign_of_zero_is_zero():
    assert evaluate(sign(X1), [0.0]) == 0.0


def test_negative_sqrt_argument_is_a_domain_error():
    with pytest.raises(DomainError):
        evaluate(sqrt(X1), [-1.0])


def test_constant_negative_sqrt_is_a_domain_error():
    with pytest.raises(DomainError):
        canonical(sqrt(Const(-2.0)))


def test_evaluate_many_broadcasts_constants():
    pts = np.ones((2, 5))
    assert evaluate_many(Const(3.0), pts).shape == (5,)


# -------------------------------------------------------------- calculus


def test_power_rule():
    assert diff(X1**3, 1) == canonical(3 * X1**2)


def test_sin_derivative():
    assert diff(sin(X2), 2) == cos(X2)


def test_derivative_of_product_with_sqrt_matches_hand_result_and_finite_differences():
    e = X2 * sqrt(1 + X2**2)
    d = diff(e, 2)
    assert same_canonical(d, sqrt(1 + X2**2) + X2**2 / sqrt(1 + X2**2))
    f, df = lambdify(e), lambdify(d)
    rng = np.random.default_rng(1)
    for x2 in rng.uniform(-2, 2, 10):
        fd = (f(0.0, x2 + 1e-5) - f(0.0, x2 - 1e-5)) / 2e-5
        assert abs(df(0.0, x2) - fd) <= 1e-6


def test_strict_diff_rejects_sign_and_abs():
    with pytest.raises(NonDifferentiableError):
        diff(sign(X1) * X1, 1)
    assert diff(abs_(X1), 1, strict=False) == sign(X1)
    assert diff(sign(X1), 2) == Const(0.0)


@given(smooth_exprs(), st.lists(st.floats(-1.0, 1.0), min_size=2, max_size=2), st.integers(1, 2))
@PROPERTY
def test_diff_agrees_with_central_differences(e, x, var):
    x = np.array(x)
    f = lambdify(e)
    exact = lambdify(diff(e, var))(*x)
    fd = central_difference(f, x, var - 1)
    assert abs(exact - fd) <= 1e-5 * (1 + abs(exact))


@given(antideriv_class(2))
@PROPERTY
def test_antideriv_then_diff_is_identity(e):
    F = antideriv(e, 2)
    assert F is not None
    assert same_canonical(diff(F, 2), e)


@pytest.mark.parametrize("e, expected", [(sin(X2), -cos(X2)), (X2**3, X2**4 / 4)])
def test_antideriv_examples(e, expected):
    assert same_canonical(antideriv(e, 2), expected)


@pytest.mark.parametrize("e", [sqrt(1 + X2**2), X2 * sqrt(1 + X2**2), sin(X2**2), 1 / (1 + X2**2)])
def test_antideriv_outside_class_is_none(e):
    assert antideriv(e, 2) is None


def test_antideriv_treats_other_variables_as_constants():
    e = X1 * cos(2 * X2)
    assert same_canonical(antideriv(e, 2), X1 * sin(2 * X2) / 2)


# ------------------------------------------------------------- quadrature


@pytest.mark.parametrize(
    "e, lo, hi, value",
    [(sin(X2), 0.0, math.pi, 2.0), (X2**2, 0.0, 1.0, 1.0 / 3.0),
     # hand antiderivative (1 + x^2)^(3/2) / 3
     (X2 * sqrt(1 + X2**2), 0.0, 1.0, (2 * math.sqrt(2) - 1) / 3)],
)
def test_quad_examples(e, lo, hi, value):
    assert abs(quad(e, 2, lo, hi) - value) <= 1e-10


def test_integral_from_zero_matches_closed_form_for_negative_limits():
    upper = np.array([-1.5, -0.2, 0.0, 0.7, 2.0])
    got = integral_from_zero(X2 * sqrt(1 + X2**2), 2, upper)
    want = ((1 + upper**2) ** 1.5 - 1) / 3
    assert np.max(np.abs(got - want)) <= 1e-10


def test_quad_rejects_other_variables():
    with pytest.raises(ValueError):
        quad(X1 * X2, 2, 0.0, 1.0)


def test_quad_reports_unreachable_tolerance():
    with pytest.raises(QuadratureError):
        quad(sin(1000 * X2) * X2**3, 2, 0.0, 50.0, tol=1e-14, max_subdivisions=64)


# ------------------------------------------------------- structural queries


def test_match_affine_generic_decomposition():
    g1, g2 = X1**3, 1 + X1**2
    coeff, offset = match_affine(g1 + g2 * X2, 2)
    assert coeff == canonical(g2) and offset == canonical(g1)


def test_match_affine_rejects_quadratic():
    assert match_affine(X1 * X2**2, 2) is None


def test_match_affine_in_x1_with_trig_offset():
    coeff, offset = match_affine(2.5 * X1 + sin(X2), 1)
    assert coeff == Const(2.5) and offset == sin(X2)


def test_match_affine_rejects_nonlinear_atoms():
    assert match_affine(sin(X2) + X2, 2) is None


@given(smooth_exprs())
@PROPERTY
def test_match_affine_reconstructs(e):
    for var in (1, 2):
        m = match_affine(e, var)
        if m is not None:
            coeff, offset = m
            assert (canonical(e) - offset - coeff * Var(var)).is_zero()


def test_split_terms_and_proportional():
    yes, no = split_terms(X1**3 + X1 * X2, lambda t: 2 not in t.variables)
    assert yes == canonical(X1**3) and no == canonical(X1 * X2)
    assert proportional(2 * sin(X2), sin(X2)) == 2.0
    assert proportional(sin(X2) + X2, sin(X2)) is None
    assert proportional(Const(0.0), sin(X2)) == 0.0


def test_var_power_factor_and_substitute():
    assert var_power_factor(X2**2 + X2**4, 2) == 2
    assert var_power_factor(X2 + X1, 2) == 0
    assert substitute(X1**2 + X2, 1, Const(3.0)) == canonical(9 + X2)


def test_smoothness_detection():
    assert is_smooth(X2 * sqrt(1 + X2**2))
    assert not is_smooth(sqrt(X2**2))
    assert not is_smooth(sign(X2) * X2)


# ---------------------------------------------------------------- domains


def test_domain_parse_grid_and_scaling():
    d = Domain.parse("x1=-2:2,x2=-1:1")
    assert d.dim == 2 and d.bounds == ((-2.0, 2.0), (-1.0, 1.0))
    g = d.grid(5)
    assert g.shape == (2, 25) and g.min() == -2.0
    assert d.scaled(0.5).bounds == ((-1.0, 1.0), (-0.5, 0.5))
    assert d.corners().shape == (2, 4)
    assert d.contains(np.array([[0.0, 3.0], [0.0, 0.0]])).tolist() == [True, False]


@pytest.mark.parametrize("text", ["x1=2:-2,x2=-1:1", "x1=-1:1,x3=-1:1", "y=-1:1", "x1=-1"])
def test_domain_parse_rejects_bad_input(text):
    with pytest.raises(ValueError):
        Domain.parse(text)
