from typing import Iterable, Optional


class AdvmcError(Exception):
    """Base exception for advmc errors"""
    pass


# Models

class ModelError(AdvmcError):
    """Raised when a DTMC or MDP breaks one of its invariants"""
    pass


class RowSumViolation(ModelError):
    """Raised when a probability row does not sum to 1"""

    def __init__(self, row: int, total: float, action: Optional[str] = None):
        self.row = row
        self.total = total
        self.action = action
        where = f"row {row}" if action is None else f"row {row} action {action!r}"
        super().__init__(f"RowSumViolation: {where} sums to {total!r}")


class EntryOutOfRange(ModelError):
    """Raised when a transition probability leaves [0, 1]"""

    def __init__(self, source: int, target: int, value: float):
        self.source = source
        self.target = target
        self.value = value
        super().__init__(f"EntryOutOfRange: P({source},{target}) = {value!r}")


class BadInit(ModelError):
    """Raised when the initial state is not a state of the model"""

    def __init__(self, init: int, n: int):
        self.init = init
        self.n = n
        super().__init__(f"BadInit: initial state {init} not in 0..{n - 1}")


class BadLabel(ModelError):
    """Raised when a label references an undeclared atom or state"""

    def __init__(self, state: int, label):
        self.state = state
        self.label = label
        super().__init__(f"BadLabel: state {state} carries undeclared label {label!r}")


class NoEnabledAction(ModelError):
    """Raised when an MDP state has no enabled action"""

    def __init__(self, state: int):
        self.state = state
        super().__init__(f"NoEnabledAction: state {state}")


class PolicyActionDisabled(ModelError):
    """Raised when a policy picks an action that is not enabled"""

    def __init__(self, state: int, action: Optional[str]):
        self.state = state
        self.action = action
        super().__init__(f"PolicyActionDisabled: state {state} action {action!r}")


class InfeasiblePerturbation(ModelError):
    """Raised when P+X is not a stochastic matrix"""
    pass


class ParseError(AdvmcError):
    """Raised when a model, threat or result file cannot be read"""

    def __init__(self, message: str, path=None, line: Optional[int] = None, field: Optional[str] = None):
        self.path = path
        self.line = line
        self.field = field
        context = []
        if path is not None:
            context.append(str(path))
        if line is not None:
            context.append(f"line {line}")
        if field:
            context.append(f"field {field}")
        prefix = f"{':'.join(context)}: " if context else ""
        super().__init__(f"ParseError: {prefix}{message}")


# Properties

class PropertyError(AdvmcError):
    """Base for property parsing and evaluation errors"""
    pass


class PropertySyntaxError(PropertyError):
    """Raised when a property does not match the grammar"""

    def __init__(self, position: int, expected: Iterable[str], text: str = ""):
        self.position = position
        self.expected = frozenset(expected)
        self.text = text
        wanted = ", ".join(sorted(self.expected)) or "end of input"
        super().__init__(f"SyntaxError at position {position}: expected one of {wanted}")


class NestedFormulaError(PropertySyntaxError):
    """Raised for nested temporal operators or boolean combinations of path formulae"""
    pass


class UnknownAtom(PropertyError):
    """Raised when a property names an atom the model does not declare"""

    def __init__(self, atom: str):
        self.atom = atom
        super().__init__(f"UnknownAtom: {atom!r}")


class StateOutOfRange(PropertyError):
    """Raised when a property compares against a state index >= n"""

    def __init__(self, index: int, n: int):
        self.index = index
        self.n = n
        super().__init__(f"StateOutOfRange: s={index} but model has {n} states")


class SingularSystem(AdvmcError):
    """Raised when the unbounded-until linear system has a vanishing pivot"""
    pass


# Threat models

class ThreatError(AdvmcError):
    """Base for threat model errors"""
    pass


class EmptyThreat(ThreatError):
    """Raised when a threat model leaves no free variable"""
    pass


class ProjectionFailed(ThreatError):
    """Raised when a row's box and sum constraint do not intersect"""
    pass


# Symbolic engine

class SymbolicError(AdvmcError):
    """Base for symbolic solution function errors"""
    pass


class DegreeOverflow(SymbolicError):
    """Raised when a symbolic function grows past the term cap"""

    def __init__(self, terms: int, cap: int):
        self.terms = terms
        self.cap = cap
        super().__init__(f"DegreeOverflow: {terms} monomials exceed cap {cap}")


class DivisionByZeroPolynomial(SymbolicError):
    """Raised when dividing by the zero polynomial"""
    pass


class MissingVariable(SymbolicError):
    """Raised when an assignment does not cover every variable"""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"MissingVariable: {name!r}")


class DenominatorNearZero(SymbolicError):
    """Raised when a rational function is instantiated at a pole"""
    pass


class UnsupportedForSymbolic(SymbolicError):
    """Raised when a formula is outside the symbolic fragment"""
    pass


# Attacks

class TooManyVariables(AdvmcError):
    """Raised when the brute-force oracle is asked for too many variables"""

    def __init__(self, count: int, limit: int):
        self.count = count
        self.limit = limit
        super().__init__(f"TooManyVariables: {count} free variables, limit is {limit}")


class SolverTimeout(AdvmcError):
    """Raised when synthesis or optimization passes its deadline"""

    def __init__(self, phase: str, seconds: float):
        self.phase = phase
        self.seconds = seconds
        super().__init__(f"SolverTimeout: {phase} exceeded {seconds:.1f}s")


class ParameterOutOfRange(AdvmcError):
    """Raised when a case-study constructor gets an invalid parameter"""
    pass
