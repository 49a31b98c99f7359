from dataclasses import dataclass
from typing import Optional, Union

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken

from advmc.utils.errors import NestedFormulaError, PropertySyntaxError

RESERVED = frozenset({"X", "U", "F", "G", "P", "s", "true", "false"})

GRAMMAR = r"""
start: _PROB _EQ _QUERY _LSQB path _RSQB

path: _NEXT st                          -> next_
    | st _UNTIL st                      -> until
    | st _UNTIL _LE INT st              -> bounded_until
    | _EVENTUALLY st                    -> eventually
    | _EVENTUALLY _LE INT st            -> bounded_eventually
    | _GLOBALLY st                      -> globally
    | _GLOBALLY _LE INT st              -> bounded_globally

?st: disj
?disj: conj
     | disj _OR conj                    -> or_
?conj: neg
     | conj _AND neg                    -> and_
?neg: primary
    | _BANG neg                         -> not_
?primary: IDENT                         -> atom
        | _STATE _EQ INT                -> state_eq
        | _STATE _NE INT                -> state_ne
        | _TRUE                         -> true
        | _FALSE                        -> false
        | _LPAR st _RPAR

_PROB: "P"
_QUERY: "?"
_LSQB: "["
_RSQB: "]"
_NEXT: "X"
_UNTIL: "U"
_EVENTUALLY: "F"
_GLOBALLY: "G"
_STATE: "s"
_TRUE: "true"
_FALSE: "false"
_LE: "<="
_NE: "!="
_EQ: "="
_BANG: "!"
_AND: "&"
_OR: "|"
_LPAR: "("
_RPAR: ")"
IDENT: /[A-Za-z_][A-Za-z0-9_]*/

%import common.INT
%import common.WS
%ignore WS
"""

TEMPORAL_TOKENS = frozenset({"_NEXT", "_UNTIL", "_EVENTUALLY", "_GLOBALLY", "_PROB"})

DISPLAY = {
    "_PROB": "P", "_QUERY": "?", "_LSQB": "[", "_RSQB": "]", "_NEXT": "X", "_UNTIL": "U",
    "_EVENTUALLY": "F", "_GLOBALLY": "G", "_STATE": "s", "_TRUE": "true", "_FALSE": "false",
    "_LE": "<=", "_NE": "!=", "_EQ": "=", "_BANG": "!", "_AND": "&", "_OR": "|",
    "_LPAR": "(", "_RPAR": ")", "IDENT": "identifier", "INT": "integer", "$END": "end of input",
}


# State expressions

@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class StateIndex:
    index: int
    negated: bool = False


@dataclass(frozen=True)
class Not:
    inner: "StateExpr"


@dataclass(frozen=True)
class And:
    lhs: "StateExpr"
    rhs: "StateExpr"


@dataclass(frozen=True)
class Or:
    lhs: "StateExpr"
    rhs: "StateExpr"


StateExpr = Union[Const, Atom, StateIndex, Not, And, Or]


# Path formulae

@dataclass(frozen=True)
class Next:
    expr: StateExpr


@dataclass(frozen=True)
class Until:
    lhs: StateExpr
    rhs: StateExpr
    bound: Optional[int] = None


@dataclass(frozen=True)
class Complement:
    """Probability of the inner formula subtracted from 1 (desugared G)"""
    inner: Union[Next, Until]


PathFormula = Union[Next, Until, Complement]

TRUE = Const(True)


@v_args(inline=True)
class _ToAst(Transformer):
    def start(self, path):
        return path

    def next_(self, expr):
        return Next(expr)

    def until(self, lhs, rhs):
        return Until(lhs, rhs)

    def bounded_until(self, lhs, bound, rhs):
        return Until(lhs, rhs, int(bound))

    def eventually(self, expr):
        return Until(TRUE, expr)

    def bounded_eventually(self, bound, expr):
        return Until(TRUE, expr, int(bound))

    def globally(self, expr):
        return Complement(Until(TRUE, Not(expr)))

    def bounded_globally(self, bound, expr):
        return Complement(Until(TRUE, Not(expr), int(bound)))

    def or_(self, lhs, rhs):
        return Or(lhs, rhs)

    def and_(self, lhs, rhs):
        return And(lhs, rhs)

    def not_(self, inner):
        return Not(inner)

    def atom(self, token):
        return Atom(str(token))

    def state_eq(self, index):
        return StateIndex(int(index))

    def state_ne(self, index):
        return StateIndex(int(index), negated=True)

    def true(self):
        return Const(True)

    def false(self):
        return Const(False)


_parser = Lark(GRAMMAR, parser="lalr", lexer="basic", maybe_placeholders=False)


def _expected(names) -> set:
    return {DISPLAY.get(name, name) for name in (names or ())}


def parse_property(text: str) -> PathFormula:
    """Parse `P=? [ path ]` into a path formula with F/G desugared"""
    try:
        tree = _parser.parse(text)
    except UnexpectedToken as e:
        token_type = e.token.type
        position = len(text) if token_type == "$END" else e.token.start_pos
        if token_type in TEMPORAL_TOKENS:
            raise NestedFormulaError(position, _expected(e.expected), text) from None
        raise PropertySyntaxError(position, _expected(e.expected), text) from None
    except UnexpectedCharacters as e:
        raise PropertySyntaxError(e.pos_in_stream, _expected(e.allowed), text) from None
    except UnexpectedEOF as e:
        raise PropertySyntaxError(len(text), _expected(e.expected), text) from None
    except UnexpectedInput as e:
        raise PropertySyntaxError(getattr(e, "pos_in_stream", 0) or 0, (), text) from None
    return _ToAst().transform(tree)


def format_state(expr: StateExpr) -> str:
    if isinstance(expr, Const):
        return "true" if expr.value else "false"
    if isinstance(expr, Atom):
        return expr.name
    if isinstance(expr, StateIndex):
        return f"s{'!=' if expr.negated else '='}{expr.index}"
    if isinstance(expr, Not):
        return f"!{format_state(expr.inner)}"
    if isinstance(expr, And):
        return f"({format_state(expr.lhs)} & {format_state(expr.rhs)})"
    return f"({format_state(expr.lhs)} | {format_state(expr.rhs)})"


def format_path(phi: PathFormula) -> str:
    if isinstance(phi, Complement):
        return f"1 - [{format_path(phi.inner)}]"
    if isinstance(phi, Next):
        return f"X {format_state(phi.expr)}"
    op = "U" if phi.bound is None else f"U<={phi.bound}"
    return f"{format_state(phi.lhs)} {op} {format_state(phi.rhs)}"
