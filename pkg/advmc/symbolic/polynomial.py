from fractions import Fraction
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

from advmc.utils.errors import MissingVariable

Exponents = Tuple[int, ...]
Scalar = Union[int, Fraction, float]


def to_fraction(value: Scalar) -> Fraction:
    """Exact rational for a coefficient; floats go through their shortest decimal form"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


def grlex_key(exponents: Exponents):
    return (sum(exponents), exponents)


class Polynomial:
    """Sparse multivariate polynomial with exact rational coefficients.

    Terms are stored as {exponent vector: coefficient} over an ordered variable
    list; zero coefficients are never stored.
    """
    __slots__ = ("variables", "terms", "_compiled")

    def __init__(self, variables: Sequence[str], terms: Optional[Mapping[Exponents, Fraction]] = None):
        self.variables = tuple(variables)
        self.terms: Dict[Exponents, Fraction] = {}
        self._compiled = None
        width = len(self.variables)
        for exps, coeff in (terms or {}).items():
            if len(exps) != width:
                raise ValueError(f"exponent vector {exps} does not match {width} variables")
            coeff = to_fraction(coeff)
            if coeff != 0:
                self.terms[tuple(exps)] = coeff

    @classmethod
    def _raw(cls, variables: Tuple[str, ...], terms: Dict[Exponents, Fraction]) -> "Polynomial":
        poly = cls.__new__(cls)
        poly.variables = variables
        poly.terms = terms
        poly._compiled = None
        return poly

    @classmethod
    def constant(cls, value: Scalar, variables: Sequence[str] = ()) -> "Polynomial":
        variables = tuple(variables)
        value = to_fraction(value)
        terms = {(0,) * len(variables): value} if value != 0 else {}
        return cls._raw(variables, terms)

    @classmethod
    def zero(cls, variables: Sequence[str] = ()) -> "Polynomial":
        return cls._raw(tuple(variables), {})

    @classmethod
    def one(cls, variables: Sequence[str] = ()) -> "Polynomial":
        return cls.constant(1, variables)

    @classmethod
    def variable(cls, name: str, variables: Sequence[str]) -> "Polynomial":
        variables = tuple(variables)
        exps = tuple(1 if v == name else 0 for v in variables)
        if sum(exps) != 1:
            raise ValueError(f"{name!r} is not one of {variables}")
        return cls._raw(variables, {exps: Fraction(1)})

    # Shape

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def constant_value(self) -> Fraction:
        return self.terms.get((0,) * len(self.variables), Fraction(0))

    @property
    def num_terms(self) -> int:
        return len(self.terms)

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def leading(self) -> Tuple[Exponents, Fraction]:
        exps = max(self.terms, key=grlex_key)
        return exps, self.terms[exps]

    def used_variables(self) -> Tuple[str, ...]:
        used = [False] * len(self.variables)
        for exps in self.terms:
            for i, e in enumerate(exps):
                if e:
                    used[i] = True
        return tuple(v for v, u in zip(self.variables, used) if u)

    # Alignment

    def extend(self, variables: Sequence[str]) -> "Polynomial":
        """Re-express over a variable list that contains this one's variables"""
        variables = tuple(variables)
        if variables == self.variables:
            return self
        position = {v: i for i, v in enumerate(variables)}
        mapping = []
        for v in self.variables:
            if v not in position:
                raise ValueError(f"variable {v!r} missing from {variables}")
            mapping.append(position[v])
        terms = {}
        for exps, coeff in self.terms.items():
            out = [0] * len(variables)
            for i, e in enumerate(exps):
                out[mapping[i]] = e
            terms[tuple(out)] = coeff
        return Polynomial._raw(variables, terms)

    def _align(self, other: "Polynomial") -> Tuple["Polynomial", "Polynomial"]:
        if self.variables == other.variables:
            return self, other
        merged = list(self.variables) + [v for v in other.variables if v not in self.variables]
        return self.extend(merged), other.extend(merged)

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        if isinstance(other, (int, float, Fraction)):
            return Polynomial.constant(other, self.variables)
        return NotImplemented

    # Arithmetic

    def __neg__(self) -> "Polynomial":
        return Polynomial._raw(self.variables, {e: -c for e, c in self.terms.items()})

    def __add__(self, other) -> "Polynomial":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        a, b = self._align(other)
        terms = dict(a.terms)
        for exps, coeff in b.terms.items():
            total = terms.get(exps, 0) + coeff
            if total:
                terms[exps] = total
            else:
                terms.pop(exps, None)
        return Polynomial._raw(a.variables, terms)

    __radd__ = __add__

    def __sub__(self, other) -> "Polynomial":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Polynomial":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def scale(self, factor: Scalar) -> "Polynomial":
        factor = to_fraction(factor)
        if factor == 0:
            return Polynomial.zero(self.variables)
        return Polynomial._raw(self.variables, {e: c * factor for e, c in self.terms.items()})

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, float, Fraction)):
            return self.scale(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        a, b = self._align(other)
        if b.is_constant():
            return a.scale(b.constant_value())
        if a.is_constant():
            return b.scale(a.constant_value())
        terms: Dict[Exponents, Fraction] = {}
        for e1, c1 in a.terms.items():
            for e2, c2 in b.terms.items():
                exps = tuple(x + y for x, y in zip(e1, e2))
                total = terms.get(exps, 0) + c1 * c2
                if total:
                    terms[exps] = total
                else:
                    terms.pop(exps, None)
        return Polynomial._raw(a.variables, terms)

    __rmul__ = __mul__

    def __pow__(self, power: int) -> "Polynomial":
        if power < 0:
            raise ValueError("negative powers are not polynomials")
        result = Polynomial.one(self.variables)
        base = self
        while power:
            if power & 1:
                result = result * base
            base = base * base
            power >>= 1
        return result

    def mul_variable(self, index: int) -> "Polynomial":
        """Multiply by the index-th variable"""
        terms = {}
        for exps, coeff in self.terms.items():
            shifted = list(exps)
            shifted[index] += 1
            terms[tuple(shifted)] = coeff
        return Polynomial._raw(self.variables, terms)

    def monomial_gcd(self) -> Exponents:
        width = len(self.variables)
        if not self.terms:
            return (0,) * width
        return tuple(min(e[i] for e in self.terms) for i in range(width))

    def divide_monomial(self, exponents: Exponents) -> "Polynomial":
        if not any(exponents):
            return self
        terms = {tuple(x - y for x, y in zip(e, exponents)): c for e, c in self.terms.items()}
        return Polynomial._raw(self.variables, terms)

    def __eq__(self, other) -> bool:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        a, b = self._align(other)
        return a.terms == b.terms

    __hash__ = None

    # Calculus

    def derivative(self, name: str) -> "Polynomial":
        if name not in self.variables:
            return Polynomial.zero(self.variables)
        i = self.variables.index(name)
        terms = {}
        for exps, coeff in self.terms.items():
            if exps[i]:
                lowered = list(exps)
                lowered[i] -= 1
                terms[tuple(lowered)] = coeff * exps[i]
        return Polynomial._raw(self.variables, terms)

    # Evaluation

    def _point(self, assignment) -> Tuple[float, ...]:
        if isinstance(assignment, Mapping):
            values = []
            for name in self.variables:
                if name not in assignment:
                    raise MissingVariable(name)
                values.append(float(assignment[name]))
            return tuple(values)
        values = tuple(float(v) for v in assignment)
        if len(values) != len(self.variables):
            raise MissingVariable(self.variables[len(values)] if len(values) < len(self.variables) else "?")
        return values

    def _compile(self):
        if self._compiled is None:
            items = [(exps, float(coeff)) for exps, coeff in self.terms.items()]
            self._compiled = _horner(items, 0, len(self.variables))
        return self._compiled

    def evaluate(self, assignment) -> float:
        """Horner evaluation, nested in variable order"""
        if not self.terms:
            return 0.0
        return _eval_horner(self._compile(), self._point(assignment), 0, len(self.variables))

    def evaluate_exact(self, assignment: Mapping[str, Scalar]) -> Fraction:
        values = []
        for name in self.variables:
            if name not in assignment:
                raise MissingVariable(name)
            values.append(to_fraction(assignment[name]))
        total = Fraction(0)
        for exps, coeff in self.terms.items():
            term = coeff
            for v, e in zip(values, exps):
                if e:
                    term *= v ** e
            total += term
        return total

    # Text

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for position, exps in enumerate(sorted(self.terms, key=grlex_key, reverse=True)):
            coeff = self.terms[exps]
            monomial = "*".join(
                name if e == 1 else f"{name}^{e}"
                for name, e in zip(self.variables, exps) if e
            )
            if position == 0:
                parts.append(_first_term(coeff, monomial))
            else:
                sign = " - " if coeff < 0 else " + "
                parts.append(sign + _term(abs(coeff), monomial))
        return "".join(parts)

    def __repr__(self) -> str:
        return f"Polynomial({self.to_text()!r})"


def _format_coeff(coeff: Fraction) -> str:
    return str(coeff.numerator) if coeff.denominator == 1 else f"{coeff.numerator}/{coeff.denominator}"


def _term(coeff: Fraction, monomial: str) -> str:
    if not monomial:
        return _format_coeff(coeff)
    if coeff == 1:
        return monomial
    if coeff.denominator == 1:
        return f"{coeff.numerator}*{monomial}"
    return f"({_format_coeff(coeff)})*{monomial}"


def _first_term(coeff: Fraction, monomial: str) -> str:
    if coeff < 0 and monomial and coeff.denominator == 1:
        return "-" + _term(-coeff, monomial)
    return _term(coeff, monomial)


def _horner(items, depth: int, width: int):
    if depth == width:
        return sum(c for _, c in items)
    groups: Dict[int, list] = {}
    for exps, coeff in items:
        groups.setdefault(exps[depth], []).append((exps, coeff))
    return [(deg, _horner(group, depth + 1, width)) for deg, group in sorted(groups.items(), reverse=True)]


def _eval_horner(node, point: Sequence[float], depth: int, width: int) -> float:
    if depth == width:
        return node
    x = point[depth]
    acc = 0.0
    previous = None
    for deg, child in node:
        if previous is not None:
            acc *= x ** (previous - deg)
        acc += _eval_horner(child, point, depth + 1, width)
        previous = deg
    return acc * x ** previous
