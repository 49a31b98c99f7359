from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.linalg import lu_factor, lu_solve

from advmc.models.chain import Dtmc
from advmc.services.properties import (
    And,
    Atom,
    Complement,
    Const,
    Next,
    Not,
    Or,
    PathFormula,
    StateExpr,
    StateIndex,
    Until,
)
from advmc.utils.errors import SingularSystem, StateOutOfRange, UnknownAtom
from advmc.utils.logging import get_logger

logger = get_logger(__name__)

PIVOT_TOLERANCE = 1e-12
DEFICIENCY_TOLERANCE = 1e-12


def state_mask(model: Dtmc, expr: StateExpr) -> np.ndarray:
    """Boolean vector of the states satisfying a state expression"""
    n = model.n
    if isinstance(expr, Const):
        return np.full(n, expr.value, dtype=bool)
    if isinstance(expr, Atom):
        if expr.name not in model.atoms:
            raise UnknownAtom(expr.name)
        i = model.atoms.index(expr.name)
        return np.array([i in label for label in model.labels], dtype=bool)
    if isinstance(expr, StateIndex):
        if not 0 <= expr.index < n:
            raise StateOutOfRange(expr.index, n)
        mask = np.zeros(n, dtype=bool)
        mask[expr.index] = True
        return ~mask if expr.negated else mask
    if isinstance(expr, Not):
        return ~state_mask(model, expr.inner)
    if isinstance(expr, And):
        return state_mask(model, expr.lhs) & state_mask(model, expr.rhs)
    if isinstance(expr, Or):
        return state_mask(model, expr.lhs) | state_mask(model, expr.rhs)
    raise TypeError(f"not a state expression: {expr!r}")


@dataclass(frozen=True)
class CompiledProperty:
    """A path formula with its state expressions resolved against one model"""
    kind: str
    lhs: np.ndarray
    rhs: np.ndarray
    bound: Optional[int]
    complement: bool


def compile_property(model: Dtmc, phi: PathFormula) -> CompiledProperty:
    complement = False
    if isinstance(phi, Complement):
        complement = True
        phi = phi.inner
    if isinstance(phi, Next):
        rhs = state_mask(model, phi.expr)
        return CompiledProperty("next", np.ones(model.n, dtype=bool), rhs, 1, complement)
    if isinstance(phi, Until):
        lhs = state_mask(model, phi.lhs)
        rhs = state_mask(model, phi.rhs)
        if phi.bound is not None and phi.bound < 0:
            raise ValueError(f"negative step bound {phi.bound}")
        kind = "until" if phi.bound is None else "bounded"
        return CompiledProperty(kind, lhs, rhs, phi.bound, complement)
    raise TypeError(f"not a path formula: {phi!r}")


def _structure(matrix) -> sparse.csr_matrix:
    return sparse.csr_matrix(matrix > 0, dtype=np.int8)


def backward_reach(structure: sparse.csr_matrix, seeds: np.ndarray, through: np.ndarray) -> np.ndarray:
    """States that reach a seed along edges whose sources lie in `through`"""
    reached = seeds.copy()
    frontier = seeds.copy()
    while frontier.any():
        predecessors = structure.dot(frontier.astype(np.int8)) > 0
        frontier = predecessors & through & ~reached
        reached |= frontier
    return reached


def prob0(structure: sparse.csr_matrix, lhs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return ~backward_reach(structure, rhs, lhs & ~rhs)


def prob1(structure: sparse.csr_matrix, lhs: np.ndarray, rhs: np.ndarray, no: np.ndarray,
          deficient: Optional[np.ndarray] = None) -> np.ndarray:
    seeds = no.copy()
    if deficient is not None:
        seeds |= deficient & lhs & ~rhs
    return ~backward_reach(structure, seeds, lhs & ~rhs)


def _bounded(matrix, prop: CompiledProperty) -> np.ndarray:
    x = prop.rhs.astype(float)
    keep = prop.lhs & ~prop.rhs
    for _ in range(prop.bound):
        x = np.where(prop.rhs, 1.0, np.where(keep, matrix.dot(x), 0.0))
    return x


def _next(matrix, prop: CompiledProperty) -> np.ndarray:
    return np.asarray(matrix.dot(prop.rhs.astype(float)), dtype=float)


def _unbounded(matrix, prop: CompiledProperty) -> np.ndarray:
    matrix = sparse.csr_matrix(matrix)
    n = matrix.shape[0]
    structure = _structure(matrix)
    no = prob0(structure, prop.lhs, prop.rhs)
    row_sums = np.asarray(matrix.sum(axis=1)).ravel()
    deficient = row_sums < 1.0 - DEFICIENCY_TOLERANCE
    yes = prob1(structure, prop.lhs, prop.rhs, no, deficient)
    maybe = ~(no | yes)
    x = np.zeros(n)
    x[yes] = 1.0
    idx = np.flatnonzero(maybe)
    logger.debug(f"Unbounded until: {int(no.sum())} prob0, {int(yes.sum())} prob1, {idx.size} to solve")
    if idx.size:
        block = matrix[idx][:, idx].toarray()
        b = np.asarray(matrix[idx][:, np.flatnonzero(yes)].sum(axis=1)).ravel()
        system = np.eye(idx.size) - block
        lu, piv = lu_factor(system, check_finite=False)
        smallest = np.min(np.abs(np.diag(lu)))
        if smallest < PIVOT_TOLERANCE:
            raise SingularSystem(f"pivot {smallest:.3e} below {PIVOT_TOLERANCE} on {idx.size} states")
        x[idx] = lu_solve((lu, piv), b, check_finite=False)
    return x


def evaluate(matrix, prop: CompiledProperty) -> np.ndarray:
    """Satisfaction probabilities of every state under a (possibly sub-stochastic) matrix"""
    if prop.kind == "next":
        x = _next(matrix, prop)
    elif prop.kind == "bounded":
        x = _bounded(matrix, prop)
    else:
        x = _unbounded(matrix, prop)
    if prop.complement:
        x = 1.0 - x
    return x


def sat_prob_all_states(model: Dtmc, phi: PathFormula) -> np.ndarray:
    return evaluate(model.matrix, compile_property(model, phi))


def sat_prob(model: Dtmc, phi: PathFormula) -> float:
    return float(sat_prob_all_states(model, phi)[model.init])


def sat_prob_batch(model: Dtmc, phi: PathFormula, matrices: np.ndarray) -> np.ndarray:
    """Pr(init |= phi) for a stack of dense matrices sharing the model's labelling"""
    prop = compile_property(model, phi)
    stack = np.asarray(matrices, dtype=float)
    if prop.kind == "until":
        return np.array([evaluate(sparse.csr_matrix(m), prop)[model.init] for m in stack])
    batch = stack.shape[0]
    rhs = np.broadcast_to(prop.rhs.astype(float), (batch, model.n))
    if prop.kind == "next":
        x = np.einsum("bij,bj->bi", stack, rhs)
    else:
        keep = prop.lhs & ~prop.rhs
        x = rhs.copy()
        for _ in range(prop.bound):
            step = np.einsum("bij,bj->bi", stack, x)
            x = np.where(prop.rhs, 1.0, np.where(keep, step, 0.0))
    values = x[:, model.init]
    if prop.complement:
        values = 1.0 - values
    return values
