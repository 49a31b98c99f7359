import time
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from advmc.models.chain import Dtmc
from advmc.models.threat import FreeVariable, ThreatModel
from advmc.services.checker import compile_property, evaluate
from advmc.services.properties import PathFormula
from advmc.symbolic.pdtmc import Pdtmc, build_pdtmc, gradient, synthesize
from advmc.utils.logging import get_logger

logger = get_logger(__name__)


class DirectObjective:
    """Pr(init |= phi) of P with the free cells overwritten, by explicit model checking"""

    def __init__(self, model: Dtmc, phi: PathFormula, variables: Sequence[FreeVariable], fd_step: float = 1e-6):
        self.model = model
        self.prop = compile_property(model, phi)
        self.variables = list(variables)
        self.fd_step = fd_step
        self.evaluations = 0

        # union of the model's support and every free cell, so the sparsity pattern never changes
        cells = {}
        for s, row in enumerate(model.rows):
            for t, p in row:
                cells[(s, t)] = p
        for v in self.variables:
            cells.setdefault(v.transition, 0.0)
        keys = sorted(cells)
        self._indices = np.array([t for _, t in keys], dtype=np.int64)
        self._indptr = np.searchsorted(np.array([s for s, _ in keys], dtype=np.int64), np.arange(model.n + 1))
        self._data = np.array([cells[k] for k in keys], dtype=float)
        slot = {k: i for i, k in enumerate(keys)}
        self._positions = np.array([slot[v.transition] for v in self.variables], dtype=np.int64)

    def matrix(self, values: np.ndarray) -> sparse.csr_matrix:
        data = self._data.copy()
        data[self._positions] = values
        return sparse.csr_matrix((data, self._indices, self._indptr), shape=(self.model.n, self.model.n))

    def value(self, values: np.ndarray) -> float:
        self.evaluations += 1
        return float(evaluate(self.matrix(values), self.prop)[self.model.init])

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """Central finite differences; perturbed points may leave the row-sum slice"""
        h = self.fd_step
        grad = np.zeros(len(self.variables))
        for i in range(len(self.variables)):
            up = np.array(values, dtype=float)
            down = up.copy()
            up[i] += h
            down[i] -= h
            grad[i] = (self.value(up) - self.value(down)) / (2.0 * h)
        return grad


class SymbolicObjective:
    """Objective and gradient from a pre-synthesized solution function"""

    def __init__(self, model: Dtmc, tm: ThreatModel, phi: PathFormula, variables: Sequence[FreeVariable],
                 order: str = "fill-in", max_terms: Optional[int] = None, timeout: Optional[float] = None):
        start = time.time()
        self.pdtmc: Pdtmc = build_pdtmc(model, tm)
        names = self.pdtmc.names
        expected = tuple(v.name for v in variables)
        if names != expected:
            raise ValueError(f"pDTMC variables {names} do not match {expected}")
        self.function = synthesize(self.pdtmc, phi, order=order, cap=max_terms, timeout=timeout)
        self.partials = gradient(self.function, names)
        self.synthesis_seconds = time.time() - start
        self.evaluations = 0
        logger.info(
            f"Synthesized solution function with {self.function.num_terms} terms "
            f"in {self.synthesis_seconds:.3f}s"
        )

    def value(self, values: np.ndarray) -> float:
        self.evaluations += 1
        return float(self.function.evaluate(list(values)))

    def gradient(self, values: np.ndarray) -> np.ndarray:
        point = list(values)
        return np.array([float(p.evaluate(point)) for p in self.partials])
