import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from advmc.models.chain import Dtmc
from advmc.models.threat import FreeVariable, ThreatModel
from advmc.services.checker import compile_property, prob0, prob1
from advmc.services.properties import Complement, Next, PathFormula, Until
from advmc.services.threats import free_variables
from advmc.symbolic.polynomial import Polynomial, to_fraction
from advmc.symbolic.rational import RationalFunction
from advmc.utils.errors import DegreeOverflow, EmptyThreat, SolverTimeout, UnsupportedForSymbolic
from advmc.utils.logging import get_logger
from advmc.utils.settings import default_max_terms, default_timeout

logger = get_logger(__name__)

GOAL = -1
SymbolicFunction = Union[Polynomial, RationalFunction]


@dataclass(frozen=True)
class VariableRef:
    index: int


Cell = Union[Fraction, VariableRef]


@dataclass(frozen=True, eq=False)
class Pdtmc:
    """A DTMC whose free transitions are replaced by named variables"""
    base: Dtmc
    variables: Tuple[FreeVariable, ...]
    cells: Tuple[Tuple[Tuple[int, Cell], ...], ...]

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def n(self) -> int:
        return self.base.n

    def bounds(self) -> List[Tuple[float, float]]:
        return [v.box for v in self.variables]

    def structure(self) -> sparse.csr_matrix:
        """Cells that may be positive somewhere in the variables' boxes"""
        rows, cols = [], []
        for s, row in enumerate(self.cells):
            for t, cell in row:
                positive = self.variables[cell.index].upper > 0 if isinstance(cell, VariableRef) else cell > 0
                if positive:
                    rows.append(s)
                    cols.append(t)
        data = np.ones(len(rows), dtype=np.int8)
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    def instantiate(self, assignment) -> Dtmc:
        values = _values(self, assignment)
        rows = []
        for row in self.cells:
            rows.append([(t, values[c.index] if isinstance(c, VariableRef) else float(c)) for t, c in row])
        return Dtmc.from_rows(rows, init=self.base.init, atoms=self.base.atoms,
                              labels={s: self.base.label_names(s) for s in range(self.n)})


def _values(pd: Pdtmc, assignment) -> List[float]:
    if isinstance(assignment, Mapping):
        return [float(assignment[name]) for name in pd.names]
    return [float(v) for v in assignment]


def build_pdtmc(model: Dtmc, tm: ThreatModel, strict: bool = False) -> Pdtmc:
    variables = tuple(v for v in free_variables(model, tm, strict=strict) if v.active)
    if strict and not variables:
        raise EmptyThreat(f"{tm.describe()} leaves no free variable")
    position = {v.transition: i for i, v in enumerate(variables)}
    cells = []
    for s in range(model.n):
        row: Dict[int, Cell] = {t: to_fraction(p) for t, p in model.rows[s]}
        for (src, t), i in position.items():
            if src == s:
                row[t] = VariableRef(i)
        cells.append(tuple(sorted(row.items())))
    logger.info(f"Built pDTMC with {len(variables)} variables over {model.n} states")
    return Pdtmc(base=model, variables=variables, cells=tuple(cells))


class _Budget:
    """Term cap and wall-clock deadline of one synthesis run"""

    def __init__(self, cap: Optional[int], timeout: Optional[float]):
        self.cap = cap if cap is not None else default_max_terms()
        self.timeout = timeout if timeout else default_timeout()
        self.deadline = time.time() + self.timeout

    def check_time(self):
        if time.time() > self.deadline:
            raise SolverTimeout("synthesis", self.timeout)

    def check_terms(self, terms: int):
        if terms > self.cap:
            raise DegreeOverflow(terms, self.cap)

    def check_product(self, a: RationalFunction, b: RationalFunction):
        """Refuse a product whose term-by-term expansion alone exceeds the cap"""
        self.check_time()
        work = a.num_terms * b.num_terms
        if work > self.cap:
            raise DegreeOverflow(work, self.cap)


def symbolic_bounded_until(pd: Pdtmc, phi: Union[Until, Next], cap: Optional[int] = None,
                           timeout: Optional[float] = None) -> Polynomial:
    if isinstance(phi, Until) and phi.bound is None:
        raise UnsupportedForSymbolic("unbounded until needs symbolic_unbounded_until")
    if not isinstance(phi, (Until, Next)):
        raise UnsupportedForSymbolic(f"{type(phi).__name__} is not bounded until or next")
    budget = _Budget(cap, timeout)
    names = pd.names
    prop = compile_property(pd.base, phi)
    zero = Polynomial.zero(names)
    one = Polynomial.one(names)
    x = [one if prop.rhs[s] else zero for s in range(pd.n)]
    if prop.kind == "next":
        keep = np.ones(pd.n, dtype=bool)
    else:
        keep = prop.lhs & ~prop.rhs
    rounds = prop.bound
    for step in range(rounds):
        budget.check_time()
        updated = []
        for s in range(pd.n):
            if prop.kind == "bounded" and prop.rhs[s]:
                updated.append(one)
                continue
            if not keep[s]:
                updated.append(zero)
                continue
            acc = zero
            for t, cell in pd.cells[s]:
                if x[t].is_zero():
                    continue
                if isinstance(cell, VariableRef):
                    acc = acc + x[t].mul_variable(cell.index)
                else:
                    acc = acc + x[t].scale(cell)
            updated.append(acc)
        x = updated
        total = sum(p.num_terms for p in x)
        budget.check_terms(total)
        logger.debug(f"Symbolic value iteration {step + 1}/{rounds}: {total} terms")
    return x[pd.base.init]


def _row_has_variable(row: Dict[int, RationalFunction]) -> bool:
    return any(not f.is_constant() for f in row.values())


def symbolic_unbounded_until(pd: Pdtmc, phi: Until, order: str = "fill-in", cap: Optional[int] = None,
                             timeout: Optional[float] = None) -> RationalFunction:
    """Solution function of an unbounded until by state elimination"""
    if not isinstance(phi, Until) or phi.bound is not None:
        raise UnsupportedForSymbolic("state elimination needs an unbounded until")
    if order not in ("fill-in", "index"):
        raise ValueError(f"unknown elimination order {order!r}")
    budget = _Budget(cap, timeout)
    names = pd.names
    prop = compile_property(pd.base, phi)
    structure = pd.structure()
    no = prob0(structure, prop.lhs, prop.rhs)
    yes = prob1(structure, prop.lhs, prop.rhs, no)
    init = pd.base.init
    if yes[init]:
        return RationalFunction.constant(1, names)
    if no[init]:
        return RationalFunction.constant(0, names)

    maybe = [s for s in range(pd.n) if not (no[s] or yes[s])]
    in_maybe = set(maybe)
    out: Dict[int, Dict[int, RationalFunction]] = {}
    preds: Dict[int, set] = {s: set() for s in maybe}
    for s in maybe:
        row: Dict[int, RationalFunction] = {}
        for t, cell in pd.cells[s]:
            if isinstance(cell, VariableRef):
                f = RationalFunction(Polynomial.variable(names[cell.index], names))
            else:
                f = RationalFunction.constant(cell, names)
            if t in in_maybe:
                row[t] = f
                if t != s:
                    preds[t].add(s)
            elif yes[t]:
                row[GOAL] = row[GOAL] + f if GOAL in row else f
        out[s] = row

    terms = sum(f.num_terms for row in out.values() for f in row.values())
    remaining = set(maybe) - {init}
    eliminated = 0
    while remaining:
        budget.check_time()
        if order == "index":
            e = min(remaining)
        else:
            e = min(remaining, key=lambda s: (
                _row_has_variable(out[s]),
                len(preds[s]) * len([t for t in out[s] if t != s]),
                s,
            ))
        remaining.discard(e)
        row_e = out.pop(e)
        loop = row_e.pop(e, None)
        factor = None
        if loop is not None:
            terms -= loop.num_terms
            factor = (1 - loop).reciprocal()
        for p in sorted(preds[e]):
            row_p = out[p]
            weight = row_p.pop(e)
            terms -= weight.num_terms
            if factor is not None:
                budget.check_product(weight, factor)
                weight = weight * factor
            for t, f in row_e.items():
                budget.check_product(weight, f)
                contribution = weight * f
                previous = row_p.get(t)
                if previous is not None:
                    terms -= previous.num_terms
                    budget.check_product(previous, contribution)
                    contribution = previous + contribution
                row_p[t] = contribution
                terms += contribution.num_terms
                if t not in (GOAL, p):
                    preds[t].add(p)
            budget.check_terms(terms)
        for t, f in row_e.items():
            terms -= f.num_terms
            if t != GOAL:
                preds[t].discard(e)
        del preds[e]
        eliminated += 1
        logger.debug(f"Eliminated state {e} ({eliminated}/{len(maybe) - 1}): {terms} terms")

    row = out[init]
    reach = row.get(GOAL, RationalFunction.constant(0, names))
    loop = row.get(init)
    if loop is None:
        return reach
    factor = (1 - loop).reciprocal()
    budget.check_product(reach, factor)
    return reach * factor


def synthesize(pd: Pdtmc, phi: PathFormula, order: str = "fill-in", cap: Optional[int] = None,
               timeout: Optional[float] = None) -> SymbolicFunction:
    """Symbolic solution function of phi over the pDTMC's variables"""
    if isinstance(phi, Complement):
        return 1 - synthesize(pd, phi.inner, order=order, cap=cap, timeout=timeout)
    if isinstance(phi, Next) or (isinstance(phi, Until) and phi.bound is not None):
        return symbolic_bounded_until(pd, phi, cap=cap, timeout=timeout)
    if isinstance(phi, Until):
        return symbolic_unbounded_until(pd, phi, order=order, cap=cap, timeout=timeout)
    raise UnsupportedForSymbolic(f"{type(phi).__name__} is outside the until/next fragment")


def instantiate(f: SymbolicFunction, assignment: Mapping[str, float]) -> float:
    return f.evaluate(assignment)


def differentiate(f: SymbolicFunction, variable: str) -> SymbolicFunction:
    return f.derivative(variable)


def gradient(f: SymbolicFunction, names: Sequence[str]) -> List[SymbolicFunction]:
    return [differentiate(f, name) for name in names]
