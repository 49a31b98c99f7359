from fractions import Fraction

import numpy as np
import pytest

from advmc.symbolic.polynomial import Polynomial, to_fraction
from advmc.symbolic.rational import RationalFunction
from advmc.utils.errors import DenominatorNearZero, DivisionByZeroPolynomial, MissingVariable

VARS = ("a", "b", "c")


def var(name):
    return Polynomial.variable(name, VARS)


def test_float_coefficients_are_exact_decimals():
    assert to_fraction(0.1) == Fraction(1, 10)
    assert to_fraction(0.7) == Fraction(7, 10)


def test_text_is_graded_lex_with_rational_coefficients():
    poly = Polynomial(VARS, {(2, 0, 1): Fraction(-1, 5), (0, 1, 0): 3, (0, 0, 0): Fraction(-7, 2)})
    assert poly.to_text() == "(-1/5)*a^2*c + 3*b - 7/2"
    assert Polynomial.zero(VARS).to_text() == "0"


def test_arithmetic_identities():
    a, b = var("a"), var("b")
    assert (a + b) * (a - b) == a * a - b * b
    assert (a + 1) ** 3 == a ** 3 + 3 * a ** 2 + 3 * a + 1
    assert a - a == 0
    assert (a * 0).is_zero()


def test_cancellation_removes_terms():
    a, b = var("a"), var("b")
    poly = (a + b) - b
    assert poly.num_terms == 1
    assert poly.used_variables() == ("a",)


def test_align_different_variable_lists():
    x = Polynomial.variable("x", ["x"])
    y = Polynomial.variable("y", ["y"])
    total = x + y
    assert total.variables == ("x", "y")
    assert total.evaluate({"x": 2.0, "y": 3.0}) == 5.0


def test_horner_evaluation_matches_exact():
    a, b, c = var("a"), var("b"), var("c")
    poly = 3 * a ** 4 * b - Fraction(1, 3) * a * c ** 2 + 7 * b ** 3 - 2
    point = {"a": 0.3, "b": 0.7, "c": 0.45}
    assert poly.evaluate(point) == pytest.approx(float(poly.evaluate_exact(point)), abs=1e-12)
    assert poly.evaluate([0.3, 0.7, 0.45]) == pytest.approx(poly.evaluate(point), abs=1e-15)


def test_missing_variable():
    with pytest.raises(MissingVariable) as info:
        (var("a") + var("c")).evaluate({"a": 1.0})
    assert info.value.name == "b"


def test_derivative():
    a, b = var("a"), var("b")
    poly = a ** 3 * b + 5 * b
    assert poly.derivative("a") == 3 * a ** 2 * b
    assert poly.derivative("b") == a ** 3 + 5
    assert poly.derivative("c").is_zero()


def test_degree_and_leading():
    a, b = var("a"), var("b")
    poly = a * b ** 2 + a ** 2 + 1
    assert poly.degree() == 3
    assert poly.leading() == ((1, 2, 0), Fraction(1))


def test_rational_normalizes_constant_denominator():
    a = var("a")
    rf = RationalFunction(2 * a, Polynomial.constant(4, VARS))
    assert rf.is_polynomial()
    assert rf.numerator == Fraction(1, 2) * a


def test_rational_cancels_common_monomial():
    a, b = var("a"), var("b")
    rf = RationalFunction(a * a * b, a * b + a)
    assert rf.numerator == a * b
    assert rf.denominator == b + 1


def test_rational_equal_parts_collapse_to_constant():
    a, b = var("a"), var("b")
    rf = RationalFunction(3 * (a + b), a + b)
    assert rf.is_constant()
    assert rf.numerator == 3


def test_rational_arithmetic_and_evaluation():
    a, b = var("a"), var("b")
    f = RationalFunction(a, 1 - b)
    g = RationalFunction(b, 1 - b)
    point = {"a": 0.2, "b": 0.5, "c": 0.0}
    assert (f + g).evaluate(point) == pytest.approx(1.4)
    assert (f * g).evaluate(point) == pytest.approx(0.4)
    assert (f / g).evaluate(point) == pytest.approx(0.4)
    assert (1 - f).evaluate(point) == pytest.approx(0.6)


def test_rational_quotient_rule():
    a, b = var("a"), var("b")
    f = RationalFunction(a, 1 - b)
    point = {"a": 0.2, "b": 0.5, "c": 0.0}
    assert f.derivative("a").evaluate(point) == pytest.approx(2.0)
    assert f.derivative("b").evaluate(point) == pytest.approx(0.2 / 0.25)


def test_rational_pole_and_zero_division():
    b = var("b")
    f = RationalFunction(Polynomial.one(VARS), 1 - b)
    with pytest.raises(DenominatorNearZero):
        f.evaluate({"a": 0.0, "b": 1.0, "c": 0.0})
    with pytest.raises(DivisionByZeroPolynomial):
        RationalFunction(b, Polynomial.zero(VARS))
    with pytest.raises(DivisionByZeroPolynomial):
        RationalFunction(Polynomial.zero(VARS)).reciprocal()


def test_rational_equality_is_cross_multiplication():
    a, b = var("a"), var("b")
    assert RationalFunction(a * (1 + b), 1 + b) == a
    assert RationalFunction(a, b + 1) != RationalFunction(a, b + 2)


def random_poly(rng):
    terms = {}
    for _ in range(int(rng.integers(1, 5))):
        exps = tuple(int(e) for e in rng.integers(0, 3, size=len(VARS)))
        terms[exps] = Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 4)))
    return Polynomial(VARS, terms)


@pytest.mark.parametrize("seed", range(25))
def test_polynomial_ring_laws(seed):
    rng = np.random.default_rng(seed)
    f, g, h = random_poly(rng), random_poly(rng), random_poly(rng)
    assert f + g == g + f
    assert f * g == g * f
    assert (f + g) + h == f + (g + h)
    assert (f * g) * h == f * (g * h)
    assert f * (g + h) == f * g + f * h
    assert (f - f).is_zero()
    assert f * 1 == f
    assert (f + 0) == f


@pytest.mark.parametrize("seed", range(25))
def test_rational_field_laws(seed):
    rng = np.random.default_rng(1000 + seed)
    f = RationalFunction(random_poly(rng), random_poly(rng) + var("a") ** 3 + 50)
    g = RationalFunction(random_poly(rng) + 1, var("b") ** 2 + 3)
    h = RationalFunction(random_poly(rng), var("c") + 2)
    assert f + g == g + f
    assert f * g == g * f
    assert (f + g) + h == f + (g + h)
    assert f * (g + h) == f * g + f * h
    assert (f + g) - g == f
    if not g.is_zero():
        assert (f * g) / g == f
        assert g * g.reciprocal() == 1
    point = {"a": 0.3, "b": 0.6, "c": 0.2}
    assert (f * g).evaluate(point) == pytest.approx(f.evaluate(point) * g.evaluate(point), rel=1e-9, abs=1e-12)
