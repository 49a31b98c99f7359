import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import numpy as np

from advmc.models.chain import Dtmc, Mdp, PerturbationMatrix, Policy, apply_perturbation, compose
from advmc.models.results import AttackResult, ComponentSweep, OptimizerOptions, StartTrace, VerifyResult
from advmc.models.threat import FreeVariable, ThreatKind, ThreatModel
from advmc.services.checker import sat_prob, sat_prob_batch
from advmc.services.objective import DirectObjective, SymbolicObjective
from advmc.services.optimizer import run_starts
from advmc.services.properties import PathFormula, format_path
from advmc.services.threats import free_variables, group_rows, random_feasible_point, to_perturbation
from advmc.utils.errors import AdvmcError, TooManyVariables
from advmc.utils.hashing import derive_seed
from advmc.utils.logging import get_logger

logger = get_logger(__name__)

METHODS = ("direct", "symbolic", "brute-force")
VERIFY_SLACK = 1e-9
BRUTE_FORCE_MAX_VARIABLES = 8
BRUTE_FORCE_MEMORY = 1 << 22


def _active(model: Dtmc, tm: ThreatModel) -> List[FreeVariable]:
    return [v for v in free_variables(model, tm) if v.active]


def _values(variables: List[FreeVariable], x: PerturbationMatrix) -> np.ndarray:
    deltas = x.as_dict()
    return np.array([v.base + deltas.get(v.transition, 0.0) for v in variables])


class AttackSynthesizer:
    """Worst-case attack synthesis over an epsilon,max threat model.

    Multi-start constrained minimization of Pr(init |= phi) over the free
    transitions. The zero perturbation is always start 0.
    """

    def __init__(
        self,
        options: Optional[OptimizerOptions] = None,
        order: str = "fill-in",
        max_terms: Optional[int] = None,
    ):
        self.options = options or OptimizerOptions()
        self.order = order
        self.max_terms = max_terms

    def run(self, model: Dtmc, tm: ThreatModel, phi: PathFormula, method: str = "direct") -> AttackResult:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")
        if method == "brute-force":
            return brute_force_min(model, tm, phi)

        start_time = time.time()
        opts = self.options
        pr_original = sat_prob(model, phi)
        variables = _active(model, tm)
        logger.info(f"Attack {tm.describe()} on [{format_path(phi)}] via {method}: "
                    f"{len(variables)} free variables, Pr={pr_original:.10g}")
        if not variables:
            return AttackResult(
                x_star=PerturbationMatrix(),
                pr_original=pr_original,
                pr_perturbed=pr_original,
                delta_star=0.0,
                method=method,
                wall_seconds=time.time() - start_time,
            )

        synthesis_seconds = 0.0
        if method == "symbolic":
            objective = SymbolicObjective(model, tm, phi, variables, order=self.order,
                                          max_terms=self.max_terms, timeout=opts.timeout_seconds)
            synthesis_seconds = objective.synthesis_seconds
        else:
            objective = DirectObjective(model, phi, variables, fd_step=opts.fd_step)

        starts = [np.array([v.base for v in variables])]
        for i in range(1, opts.starts):
            point = random_feasible_point(model, tm, derive_seed(opts.seed, "start", i), variables)
            starts.append(_values(variables, point))

        deadline = None
        if opts.timeout_seconds:
            deadline = start_time + opts.timeout_seconds
        best, traces = run_starts(objective, variables, starts, opts, deadline=deadline)

        x_star = to_perturbation(variables, best)
        pr_perturbed = sat_prob(apply_perturbation(model, x_star), phi)
        if pr_perturbed > pr_original:
            x_star, pr_perturbed = PerturbationMatrix(), pr_original
        delta_star = pr_original - pr_perturbed
        wall = time.time() - start_time
        logger.info(f"Attack done: delta*={delta_star:.10g} in {wall:.3f}s")
        return AttackResult(
            x_star=x_star,
            pr_original=pr_original,
            pr_perturbed=pr_perturbed,
            delta_star=delta_star,
            method=method,
            starts=len(starts),
            iterations=sum(t.iterations for t in traces),
            wall_seconds=wall,
            synthesis_seconds=synthesis_seconds,
            converged=[t.converged for t in traces],
            traces=traces,
        )


def synthesize_attack(model: Dtmc, tm: ThreatModel, phi: PathFormula, method: str = "direct",
                      opts: Optional[OptimizerOptions] = None) -> AttackResult:
    return AttackSynthesizer(opts).run(model, tm, phi, method)


def max_delta(model: Dtmc, tm: ThreatModel, phi: PathFormula, method: str = "direct",
              opts: Optional[OptimizerOptions] = None) -> float:
    delta = synthesize_attack(model, tm, phi, method, opts).delta_star
    return min(max(delta, 0.0), 1.0)


def verify_robustness(model: Dtmc, tm: ThreatModel, phi: PathFormula, delta: float, method: str = "direct",
                      opts: Optional[OptimizerOptions] = None) -> VerifyResult:
    """Robust iff the worst case stays within delta of the original (1e-9 slack)"""
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta {delta} outside [0, 1]")
    attack = synthesize_attack(model, tm, phi, method, opts)
    robust = attack.pr_perturbed >= attack.pr_original - delta - VERIFY_SLACK
    witness = None if robust else apply_perturbation(model, attack.x_star)
    return VerifyResult(robust=robust, delta=delta, attack=attack, witness=witness)


def synthesize_policy_attack(mdp: Mdp, policy: Policy, tm: ThreatModel, phi: PathFormula, method: str = "direct",
                             opts: Optional[OptimizerOptions] = None) -> AttackResult:
    """Attack the DTMC a fixed policy induces; non-chosen actions cannot matter"""
    return synthesize_attack(compose(mdp, policy), tm, phi, method, opts)


def _grid(lower: float, upper: float, step: float) -> np.ndarray:
    count = int(math.floor((upper - lower) / step + 1e-9))
    points = lower + step * np.arange(count + 1)
    if points[-1] < upper - 1e-12:
        points = np.append(points, upper)
    return np.minimum(points, upper)


def _row_grid(variables: List[FreeVariable], idx: np.ndarray, step: float) -> np.ndarray:
    """Feasible grid of one row: all but the last variable on the grid, the last one dependent"""
    lower = np.array([variables[i].lower for i in idx])
    upper = np.array([variables[i].upper for i in idx])
    target = math.fsum(variables[i].base for i in idx)
    axes = [_grid(lower[j], upper[j], step) for j in range(len(idx) - 1)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    dependent = target - mesh.sum(axis=1)
    keep = (dependent >= lower[-1] - 1e-12) & (dependent <= upper[-1] + 1e-12)
    return np.hstack([mesh[keep], np.clip(dependent[keep], lower[-1], upper[-1])[:, None]])


def brute_force_min(model: Dtmc, tm: ThreatModel, phi: PathFormula, resolution: int = 20,
                    max_variables: int = BRUTE_FORCE_MAX_VARIABLES) -> AttackResult:
    """Exhaustive grid over every touched row's feasible slice"""
    start_time = time.time()
    pr_original = sat_prob(model, phi)
    variables = _active(model, tm)
    if len(variables) > max_variables:
        raise TooManyVariables(len(variables), max_variables)
    if not variables:
        return AttackResult(x_star=PerturbationMatrix(), pr_original=pr_original, pr_perturbed=pr_original,
                            delta_star=0.0, method="brute-force", starts=1,
                            wall_seconds=time.time() - start_time, converged=[True])

    step = tm.epsilon / resolution
    rows = group_rows(variables)
    grids = [_row_grid(variables, idx, step) for _, idx in rows]
    sources = np.array([v.source for v in variables])
    targets = np.array([v.target for v in variables])
    base = model.dense()
    chunk = max(1, BRUTE_FORCE_MEMORY // (model.n * model.n))

    best_value = math.inf
    best_point = None
    evaluated = 0
    combos = itertools.product(*[range(len(g)) for g in grids])
    while True:
        batch = list(itertools.islice(combos, chunk))
        if not batch:
            break
        points = np.zeros((len(batch), len(variables)))
        for b, combo in enumerate(batch):
            for (_, idx), grid, k in zip(rows, grids, combo):
                points[b, idx] = grid[k]
        stack = np.repeat(base[None, :, :], len(batch), axis=0)
        stack[:, sources, targets] = points
        values = sat_prob_batch(model, phi, stack)
        i = int(np.argmin(values))
        if values[i] < best_value:
            best_value = float(values[i])
            best_point = points[i]
        evaluated += len(batch)

    x_star = to_perturbation(variables, best_point)
    pr_perturbed = sat_prob(apply_perturbation(model, x_star), phi)
    if pr_perturbed > pr_original:
        x_star, pr_perturbed = PerturbationMatrix(), pr_original
    logger.info(f"Brute force over {evaluated} grid points: min Pr={pr_perturbed:.10g}")
    return AttackResult(
        x_star=x_star,
        pr_original=pr_original,
        pr_perturbed=pr_perturbed,
        delta_star=pr_original - pr_perturbed,
        method="brute-force",
        starts=1,
        iterations=evaluated,
        wall_seconds=time.time() - start_time,
        converged=[True],
        traces=[StartTrace(index=0, iterations=evaluated, objective=pr_perturbed, converged=True)],
    )


def component_sweep(model: Dtmc, kind: ThreatKind, epsilon: float, phi: PathFormula, method: str = "direct",
                    opts: Optional[OptimizerOptions] = None, workers: int = 1) -> ComponentSweep:
    """delta* with each single state as the vulnerable set; failures are recorded, not raised"""
    kind = ThreatKind(kind)
    if not kind.by_state:
        raise ValueError(f"component sweep needs SS or SPSS, got {kind.value}")

    def one(state: int):
        tm = ThreatModel(kind=kind, epsilon=epsilon, vulnerable_states=(state,))
        try:
            return max_delta(model, tm, phi, method, opts), None
        except AdvmcError as e:
            logger.warning(f"Component sweep state {state} failed: {e}")
            return math.nan, str(e)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, range(model.n)))
    else:
        outcomes = [one(s) for s in range(model.n)]
    return ComponentSweep(
        deltas=[d for d, _ in outcomes],
        errors={s: err for s, (_, err) in enumerate(outcomes) if err is not None},
    )
