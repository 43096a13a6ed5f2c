import math
from fractions import Fraction

import numpy as np
import pytest

from src.errors import BackendError, EvalDomainError, ExprSyntaxError, InputError, UnknownIdentifierError
from src.exprlang import (
    BinOp,
    Num,
    Pow,
    Var,
    eval_exact,
    eval_float,
    hstep,
    is_polynomial,
    parse,
    to_poly,
    to_text,
    variables,
)
from src.sampling import random_polynomial_text

XY = ["x", "y"]


def test_parse_single_variable():
    assert parse("y", XY).tree == Var("y", 1)


def test_parse_precedence_tree():
    e = parse("x^2*y - 1/2", XY)
    expected = BinOp(
        "-",
        BinOp("*", Pow(Var("x", 0), 2), Var("y", 1)),
        BinOp("/", Num(Fraction(1)), Num(Fraction(2))),
    )
    assert e.tree == expected


def test_unary_minus_binds_looser_than_power():
    assert eval_float(parse("-x^2", XY), (3, 0)) == -9


def test_subtraction_is_left_associative():
    assert eval_float(parse("x - y - 1", XY), (5, 2)) == 2


def test_syntax_error_reports_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse("sin(", ["x"])
    assert info.value.offset == 4
    assert "offset 4" in info.value.message


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("x + z", XY)
    assert info.value.name == "z"
    assert info.value.offset == 4


@pytest.mark.parametrize("text", ["", "   "])
def test_empty_input(text):
    with pytest.raises(ExprSyntaxError):
        parse(text, XY)


@pytest.mark.parametrize("text", ["x^y", "x^-1", "x^2^3", "(x", "x y", "2 $ x"])
def test_malformed_expressions(text):
    with pytest.raises(ExprSyntaxError):
        parse(text, XY)


@pytest.mark.parametrize("coords", [[], ["x", "x"], ["sin"], ["1x"]])
def test_bad_coordinate_declarations(coords):
    with pytest.raises(InputError):
        parse("1", coords)


def test_eval_float_arithmetic():
    assert eval_float(parse("x^2+y", XY), (2, 3)) == 7


def test_hstep_builtin():
    e = parse("hstep(x)", ["x"])
    assert eval_float(e, (-1,)) == 0
    assert eval_float(e, (0,)) == 0
    assert eval_float(e, (1,)) == pytest.approx(0.3678794412, abs=1e-10)


def test_domain_errors_name_the_subexpression():
    with pytest.raises(EvalDomainError) as info:
        eval_float(parse("1/(x - y)", XY), (1, 1))
    assert "x-y" in info.value.subexpr
    with pytest.raises(EvalDomainError):
        eval_float(parse("sqrt(x)", ["x"]), (-1,))


def test_eval_exact_is_rational():
    e = parse("x^2*y - 1/2", XY)
    assert eval_exact(e, (Fraction(1, 3), Fraction(3))) == Fraction(-1, 6)


def test_eval_exact_rejects_transcendental_builtins():
    with pytest.raises(BackendError):
        eval_exact(parse("sin(x)", ["x"]), (Fraction(0),))


def test_polynomial_detection():
    assert is_polynomial(parse("x^2*y - 1/2", XY))
    assert is_polynomial(parse("x/2 + y/(1+1)", XY))
    assert not is_polynomial(parse("1/x", XY))
    assert not is_polynomial(parse("x/(x-x)", XY))
    assert not is_polynomial(parse("sqrt(x^2+y^2)", XY))


def test_poly_form_round_trip():
    e = parse("(x - 2*y)^3 - x*y/3 + 5", XY)
    poly = to_poly(e)
    assert poly.degree == 3
    back = poly.to_expr()
    for point in [(Fraction(1, 2), Fraction(-3, 7)), (Fraction(4), Fraction(5, 3)), (Fraction(0), Fraction(0))]:
        assert eval_exact(back, point) == eval_exact(e, point)
        assert poly.evaluate(point) == eval_exact(e, point)


def test_constant_poly_form():
    poly = to_poly(parse("1/2 - 3/4", XY))
    assert poly.is_constant
    assert poly.constant_value == Fraction(-1, 4)


@pytest.mark.parametrize(
    "text",
    ["x^2*y - 1/2", "-(x - y)^3", "sin(x)/(1 + y^2)", "x - (y - 1)", "x/(y*2)", "(-x)^2", "0.25*x"],
)
def test_to_text_reparses_to_the_same_tree(text):
    e = parse(text, XY)
    assert parse(to_text(e), XY) == e


def test_variables():
    assert variables(parse("x*hstep(-x) + 1", XY)) == {"x"}


def test_evaluation_is_deterministic():
    e = parse("exp(x)*cos(y) - sqrt(abs(x*y))", XY)
    values = {eval_float(e, (0.3, -0.7)) for _ in range(5)}
    assert len(values) == 1
    assert math.isfinite(values.pop())


@pytest.mark.parametrize(
    "text",
    [
        "(" * 3000 + "x" + ")" * 3000,
        "-" * 3000 + "x",
        "+".join(["x"] * 3000),
        "sin(" * 500 + "x" + ")" * 500,
    ],
)
def test_deep_nesting_is_a_syntax_error(text):
    with pytest.raises(ExprSyntaxError) as info:
        parse(text, ["x"])
    assert "nested too deeply" in info.value.message


def test_moderate_nesting_still_parses():
    e = parse("(" * 150 + "x" + ")" * 150 + "+" + "-" * 100 + "x", ["x"])
    assert eval_float(e, (2.0,)) == 4.0


def test_literal_out_of_float_range():
    e = parse("1e400*x", ["x"])
    with pytest.raises(EvalDomainError) as info:
        eval_float(e, (1.0,))
    assert "out of float range" in info.value.message
    assert eval_exact(e, (Fraction(1),)) == 10**400


@pytest.mark.parametrize(
    "text",
    ["x^1000000000", "x^" + "9" * 5000, "x^65", "((x+1)^8)^9", "x^40*x^40", "1e100000*x", "1" * 5000, "9" * 600 + "e400"],
)
def test_oversized_literals_are_rejected(text):
    with pytest.raises(ExprSyntaxError):
        parse(text, ["x"])


def test_large_power_is_squared_out():
    poly = to_poly(parse("((x + 1)^8)^8", ["x"]))
    assert poly.degree == 64
    assert poly.evaluate((Fraction(1),)) == 2**64


def test_hstep_decays_towards_zero():
    values = [hstep(10.0**-k) for k in range(1, 7)]
    assert values[0] == pytest.approx(math.exp(-10))
    assert values[0] > values[1] > 0
    assert all(a >= b >= 0 for a, b in zip(values, values[1:]))
    assert values[1] < 1e-40
    assert values[-1] == hstep(0.0) == hstep(-1e-6) == 0.0


def test_random_polynomials_evaluate_consistently():
    rng = np.random.default_rng(2024)
    coords = ("x", "y", "z")
    for _ in range(1000):
        e = parse(random_polynomial_text(rng, coords, degree=4, max_terms=4), coords)
        poly = to_poly(e)
        assert poly is not None
        point = tuple(Fraction(int(v), 1000) for v in rng.integers(-2000, 2001, size=3))
        exact = poly.evaluate(point)
        assert eval_exact(e, point) == exact
        scale = sum(abs(c) * math.prod(abs(v) ** p for v, p in zip(point, mono)) for mono, c in poly.terms)
        approx = eval_float(e, tuple(float(v) for v in point))
        assert abs(approx - float(exact)) <= 1e-12 * max(1.0, float(scale))
