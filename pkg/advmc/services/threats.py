import math
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from advmc.models.chain import Dtmc, PerturbationMatrix
from advmc.models.threat import FreeVariable, IdtmcExport, ThreatModel
from advmc.utils.errors import EmptyThreat, ProjectionFailed, ThreatError
from advmc.utils.logging import get_logger

logger = get_logger(__name__)

DYKSTRA_SWEEPS = 200
PROJECTION_TOLERANCE = 1e-10
FEASIBILITY_TOLERANCE = 1e-9
STRUCTURE_NOTICE = (
    "structure-preserving threat model: zero-base entries are exported as [0,0] intervals; "
    "interval semantics cannot express the zero constraints beyond that"
)


def vulnerable_pairs(model: Dtmc, tm: ThreatModel) -> List[Tuple[int, int]]:
    """Vulnerable transitions before structure filtering, sorted by (s, s')"""
    n = model.n
    if tm.kind.by_state:
        for s in tm.vulnerable_states:
            if not 0 <= s < n:
                raise ThreatError(f"vulnerable state {s} outside 0..{n - 1}")
        return sorted({(s, t) for s in tm.vulnerable_states for t in range(n)})
    for s, t in tm.vulnerable_transitions:
        if not (0 <= s < n and 0 <= t < n):
            raise ThreatError(f"vulnerable transition ({s},{t}) outside 0..{n - 1}")
    return sorted(set(tm.vulnerable_transitions))


def free_variables(model: Dtmc, tm: ThreatModel, strict: bool = False) -> List[FreeVariable]:
    eps = tm.epsilon
    candidates = []
    for s, t in vulnerable_pairs(model, tm):
        base = model.prob(s, t)
        if tm.kind.structure_preserving and base == 0.0:
            continue
        candidates.append((s, t, base))

    per_row: Dict[int, int] = defaultdict(int)
    for s, _, _ in candidates:
        per_row[s] += 1

    variables = []
    for s, t, base in candidates:
        variables.append(FreeVariable(
            source=s,
            target=t,
            base=base,
            lower=max(0.0, base - eps),
            upper=min(1.0, base + eps),
            frozen=per_row[s] < 2,
        ))

    frozen_rows = sorted({v.source for v in variables if v.frozen})
    active = [v for v in variables if v.active]
    logger.debug(f"{tm.describe()}: {len(variables)} variables, {len(active)} active, frozen rows {frozen_rows}")
    if not active and eps > 0:
        if strict:
            raise EmptyThreat(f"{tm.describe()} leaves no free variable")
        logger.warning(f"EmptyThreat: {tm.describe()} leaves no free variable")
    return variables


def allowed_pairs(model: Dtmc, tm: ThreatModel) -> Dict[Tuple[int, int], FreeVariable]:
    return {v.transition: v for v in free_variables(model, tm) if not v.frozen}


def feasible(model: Dtmc, tm: ThreatModel, x: PerturbationMatrix) -> bool:
    allowed = allowed_pairs(model, tm)
    row_totals: Dict[int, List[float]] = defaultdict(list)
    for (s, t), d in x:
        var = allowed.get((s, t))
        if var is None:
            return False
        if abs(d) > tm.epsilon + FEASIBILITY_TOLERANCE:
            return False
        value = var.base + d
        if value < -FEASIBILITY_TOLERANCE or value > 1.0 + FEASIBILITY_TOLERANCE:
            return False
        row_totals[s].append(d)
    return all(abs(math.fsum(ds)) <= FEASIBILITY_TOLERANCE for ds in row_totals.values())


def _bisect_projection(values: np.ndarray, lower: np.ndarray, upper: np.ndarray, target: float) -> np.ndarray:
    lo = float(np.min(values - upper)) - 1.0
    hi = float(np.max(values - lower)) + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        total = np.clip(values - mid, lower, upper).sum()
        if total > target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    return np.clip(values - 0.5 * (lo + hi), lower, upper)


def _absorb_residual(y: np.ndarray, lower: np.ndarray, upper: np.ndarray, target: float) -> np.ndarray:
    residual = target - math.fsum(y)
    if residual == 0.0:
        return y
    slack = (upper - y) if residual > 0 else (y - lower)
    i = int(np.argmax(slack))
    if slack[i] >= abs(residual):
        y = y.copy()
        y[i] += residual
    return y


def project_row(values: Sequence[float], lower: Sequence[float], upper: Sequence[float], target: float) -> np.ndarray:
    """Euclidean projection onto {y : lower <= y <= upper, sum(y) = target}"""
    v = np.asarray(values, dtype=float)
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    if lo.sum() > target + FEASIBILITY_TOLERANCE or hi.sum() < target - FEASIBILITY_TOLERANCE:
        raise ProjectionFailed(f"box [{lo.sum():.6g}, {hi.sum():.6g}] cannot reach row total {target:.6g}")
    m = v.size
    y = v.copy()
    p = np.zeros(m)
    q = np.zeros(m)
    converged = False
    for _ in range(DYKSTRA_SWEEPS):
        shifted = y + p
        a = shifted + (target - shifted.sum()) / m
        p = shifted - a
        boxed = a + q
        y_next = np.clip(boxed, lo, hi)
        q = boxed - y_next
        change = np.max(np.abs(y_next - y))
        y = y_next
        if change < PROJECTION_TOLERANCE and abs(y.sum() - target) < PROJECTION_TOLERANCE:
            converged = True
            break
    if not converged:
        y = _bisect_projection(v, lo, hi, target)
    return _absorb_residual(y, lo, hi, target)


def group_rows(variables: Sequence[FreeVariable]) -> List[Tuple[int, np.ndarray]]:
    """Positions of active variables grouped by source row"""
    rows: Dict[int, List[int]] = defaultdict(list)
    for i, v in enumerate(variables):
        rows[v.source].append(i)
    return [(s, np.array(idx)) for s, idx in sorted(rows.items())]


def project_point(variables: Sequence[FreeVariable], values: np.ndarray) -> np.ndarray:
    """Project a vector of absolute probabilities row by row onto the feasible set"""
    lower = np.array([v.box[0] for v in variables])
    upper = np.array([v.box[1] for v in variables])
    base = np.array([v.base for v in variables])
    out = np.array(values, dtype=float)
    for _, idx in group_rows(variables):
        target = math.fsum(base[idx])
        out[idx] = project_row(out[idx], lower[idx], upper[idx], target)
    return out


def to_perturbation(variables: Sequence[FreeVariable], values: np.ndarray) -> PerturbationMatrix:
    return PerturbationMatrix.from_dict({v.transition: float(values[i]) - v.base for i, v in enumerate(variables)})


def random_feasible_point(model: Dtmc, tm: ThreatModel, seed: int,
                          variables: Optional[List[FreeVariable]] = None) -> PerturbationMatrix:
    variables = variables if variables is not None else [v for v in free_variables(model, tm) if v.active]
    if not variables:
        return PerturbationMatrix()
    rng = np.random.default_rng(seed)
    lower = np.array([v.box[0] for v in variables])
    upper = np.array([v.box[1] for v in variables])
    sample = rng.uniform(lower, upper)
    return to_perturbation(variables, project_point(variables, sample))


def build_idtmc(model: Dtmc, tm: ThreatModel) -> IdtmcExport:
    p = model.dense()
    lower = p.copy()
    upper = p.copy()
    for v in free_variables(model, tm):
        lower[v.source, v.target] = v.lower
        upper[v.source, v.target] = v.upper
    notice = None
    if tm.kind.structure_preserving:
        notice = STRUCTURE_NOTICE
        logger.info(f"IDTMC export: {notice}")
    return IdtmcExport(lower=lower.tolist(), upper=upper.tolist(), notice=notice)
