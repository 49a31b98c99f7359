from fractions import Fraction
from typing import Mapping, Sequence

from advmc.symbolic.polynomial import Polynomial, Scalar
from advmc.utils.errors import DenominatorNearZero, DivisionByZeroPolynomial

POLE_TOLERANCE = 1e-14


class RationalFunction:
    """numerator / denominator, kept with a monic denominator.

    Normalization cancels constant content and common monomial factors only;
    there is no multivariate polynomial GCD.
    """
    __slots__ = ("numerator", "denominator")

    def __init__(self, numerator: Polynomial, denominator=None):
        if denominator is None:
            denominator = Polynomial.one(numerator.variables)
        if not isinstance(denominator, Polynomial):
            denominator = Polynomial.constant(denominator, numerator.variables)
        if denominator.is_zero():
            raise DivisionByZeroPolynomial("denominator is identically zero")
        num, den = numerator._align(denominator)
        self.numerator, self.denominator = _normalize(num, den)

    @classmethod
    def constant(cls, value: Scalar, variables: Sequence[str] = ()) -> "RationalFunction":
        return cls(Polynomial.constant(value, variables))

    @property
    def variables(self):
        return self.numerator.variables

    def is_polynomial(self) -> bool:
        return self.denominator.is_constant()

    def is_constant(self) -> bool:
        return self.numerator.is_constant() and self.denominator.is_constant()

    def is_zero(self) -> bool:
        return self.numerator.is_zero()

    @property
    def num_terms(self) -> int:
        return self.numerator.num_terms + self.denominator.num_terms

    def _coerce(self, other) -> "RationalFunction":
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, Polynomial):
            return RationalFunction(other)
        if isinstance(other, (int, float, Fraction)):
            return RationalFunction.constant(other, self.variables)
        return NotImplemented

    def __neg__(self) -> "RationalFunction":
        return _make(-self.numerator, self.denominator)

    def __add__(self, other) -> "RationalFunction":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.denominator == other.denominator:
            return RationalFunction(self.numerator + other.numerator, self.denominator)
        return RationalFunction(
            self.numerator * other.denominator + other.numerator * self.denominator,
            self.denominator * other.denominator,
        )

    __radd__ = __add__

    def __sub__(self, other) -> "RationalFunction":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "RationalFunction":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other) -> "RationalFunction":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_zero() or other.is_zero():
            return RationalFunction(Polynomial.zero(self.variables))
        return RationalFunction(self.numerator * other.numerator, self.denominator * other.denominator)

    __rmul__ = __mul__

    def reciprocal(self) -> "RationalFunction":
        if self.numerator.is_zero():
            raise DivisionByZeroPolynomial("reciprocal of the zero function")
        return RationalFunction(self.denominator, self.numerator)

    def __truediv__(self, other) -> "RationalFunction":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.reciprocal()

    def __eq__(self, other) -> bool:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self.numerator * other.denominator == other.numerator * self.denominator

    __hash__ = None

    def derivative(self, name: str) -> "RationalFunction":
        n, d = self.numerator, self.denominator
        dn, dd = n.derivative(name), d.derivative(name)
        if dd.is_zero():
            return RationalFunction(dn, d)
        return RationalFunction(dn * d - n * dd, d * d)

    def evaluate(self, assignment) -> float:
        den = self.denominator.evaluate(assignment)
        if abs(den) < POLE_TOLERANCE:
            raise DenominatorNearZero(f"denominator {den!r} at the given point")
        return self.numerator.evaluate(assignment) / den

    def evaluate_exact(self, assignment: Mapping[str, Scalar]) -> Fraction:
        den = self.denominator.evaluate_exact(assignment)
        if den == 0:
            raise DenominatorNearZero("denominator vanishes at the given point")
        return self.numerator.evaluate_exact(assignment) / den

    def to_text(self) -> str:
        if self.denominator == 1:
            return self.numerator.to_text()
        return f"({self.numerator.to_text()}) / ({self.denominator.to_text()})"

    def __repr__(self) -> str:
        return f"RationalFunction({self.to_text()!r})"


def _make(numerator: Polynomial, denominator: Polynomial) -> RationalFunction:
    rf = RationalFunction.__new__(RationalFunction)
    rf.numerator = numerator
    rf.denominator = denominator
    return rf


def _normalize(num: Polynomial, den: Polynomial):
    variables = num.variables
    if num.is_zero():
        return num, Polynomial.one(variables)
    shared = tuple(min(a, b) for a, b in zip(num.monomial_gcd(), den.monomial_gcd()))
    num = num.divide_monomial(shared)
    den = den.divide_monomial(shared)
    if den.is_constant():
        return num.scale(1 / den.constant_value()), Polynomial.one(variables)
    _, lead = den.leading()
    if lead != 1:
        num = num.scale(1 / lead)
        den = den.scale(1 / lead)
    if num.num_terms == den.num_terms:
        exps, coeff = num.leading()
        if exps == den.leading()[0] and num == den.scale(coeff):
            return Polynomial.constant(coeff, variables), Polynomial.one(variables)
    return num, den
