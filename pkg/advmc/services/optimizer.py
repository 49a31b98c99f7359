import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from advmc.models.results import OptimizerOptions, StartTrace
from advmc.models.threat import FreeVariable
from advmc.services.threats import group_rows, project_point
from advmc.utils.errors import SolverTimeout
from advmc.utils.logging import get_logger

logger = get_logger(__name__)

ARMIJO_C = 1e-4
SHRINK = 0.5


class Objective(Protocol):
    def value(self, values: np.ndarray) -> float: ...

    def gradient(self, values: np.ndarray) -> np.ndarray: ...


class _Clock:
    def __init__(self, deadline: Optional[float], timeout: Optional[float]):
        self.deadline = deadline
        self.timeout = timeout or 0.0

    def check(self):
        if self.deadline is not None and time.time() > self.deadline:
            raise SolverTimeout("optimization", self.timeout)


def projected_gradient(objective: Objective, variables: Sequence[FreeVariable], start: np.ndarray,
                       opts: OptimizerOptions, index: int = 0, clock: Optional[_Clock] = None) -> Tuple[np.ndarray, StartTrace]:
    """Projected gradient descent with Armijo backtracking"""
    clock = clock or _Clock(None, None)
    lower = np.array([v.box[0] for v in variables])
    upper = np.array([v.box[1] for v in variables])
    width = float(np.max(upper - lower)) if len(variables) else 0.0

    y = project_point(variables, start)
    f = objective.value(y)
    history = [f]
    converged = False
    iterations = 0
    while iterations < opts.max_iterations:
        clock.check()
        iterations += 1
        g = objective.gradient(y)
        scale = float(np.max(np.abs(g))) if g.size else 0.0
        if scale == 0.0 or width == 0.0:
            converged = True
            break
        t = width / scale
        accepted = False
        while True:
            candidate = project_point(variables, y - t * g)
            step = candidate - y
            if np.max(np.abs(step)) < opts.step_tolerance:
                break
            f_candidate = objective.value(candidate)
            if f_candidate <= f + ARMIJO_C * float(g.dot(step)):
                accepted = True
                break
            t *= SHRINK
        if not accepted:
            converged = True
            break
        change = f - f_candidate
        y, f = candidate, f_candidate
        history.append(f)
        if abs(change) < opts.objective_tolerance:
            converged = True
            break
    return y, StartTrace(index=index, iterations=iterations, objective=f, converged=converged, history=history)


def slsqp(objective: Objective, variables: Sequence[FreeVariable], start: np.ndarray,
          opts: OptimizerOptions, index: int = 0, clock: Optional[_Clock] = None) -> Tuple[np.ndarray, StartTrace]:
    """scipy SLSQP on the same boxes and row equalities, re-projected afterwards"""
    clock = clock or _Clock(None, None)
    rows = group_rows(variables)
    base = np.array([v.base for v in variables])
    a = np.zeros((len(rows), len(variables)))
    b = np.zeros(len(rows))
    for r, (_, idx) in enumerate(rows):
        a[r, idx] = 1.0
        b[r] = math.fsum(base[idx])
    history: List[float] = []

    def callback(xk):
        history.append(objective.value(xk))
        clock.check()

    result = minimize(
        objective.value,
        project_point(variables, start),
        jac=objective.gradient,
        method="SLSQP",
        bounds=[v.box for v in variables],
        constraints=[{"type": "eq", "fun": lambda y: a.dot(y) - b, "jac": lambda y: a}],
        options={"maxiter": opts.max_iterations, "ftol": opts.objective_tolerance},
        callback=callback,
    )
    y = project_point(variables, result.x)
    f = objective.value(y)
    history.append(f)
    return y, StartTrace(index=index, iterations=int(result.nit), objective=f, converged=bool(result.success), history=history)


def run_starts(objective: Objective, variables: Sequence[FreeVariable], starts: Sequence[np.ndarray],
               opts: OptimizerOptions, deadline: Optional[float] = None) -> Tuple[np.ndarray, List[StartTrace]]:
    """Run every start and keep the lowest objective, ties to the lowest start index"""
    clock = _Clock(deadline, opts.timeout_seconds)
    solver = slsqp if opts.solver == "slsqp" else projected_gradient

    def run(item):
        i, start = item
        y, trace = solver(objective, variables, start, opts, index=i, clock=clock)
        logger.info(
            f"Start {i}: objective={trace.objective:.10g} iterations={trace.iterations} converged={trace.converged}"
        )
        return y, trace

    items = list(enumerate(starts))
    if opts.workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=opts.workers) as pool:
            outcomes = list(pool.map(run, items))
    else:
        outcomes = [run(item) for item in items]

    best = min(range(len(outcomes)), key=lambda i: (outcomes[i][1].objective, i))
    return outcomes[best][0], [trace for _, trace in outcomes]
