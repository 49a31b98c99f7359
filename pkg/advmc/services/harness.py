import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, TextIO, Tuple

import numpy as np
from pydantic import BaseModel, field_validator

from advmc.attack import AttackSynthesizer, component_sweep
from advmc.models.chain import Dtmc, PerturbationMatrix, apply_perturbation, compose
from advmc.models.results import OptimizerOptions
from advmc.models.threat import ThreatKind, ThreatModel
from advmc.services.case_studies import GridSpec, random_gridworld
from advmc.services.checker import sat_prob_all_states
from advmc.services.properties import PathFormula, parse_property
from advmc.utils.errors import DegreeOverflow, SolverTimeout
from advmc.utils.hashing import derive_seed
from advmc.utils.logging import get_logger

logger = get_logger(__name__)

SWEEP_COLUMNS = ["epsilon", "pr_original", "pr_perturbed", "delta_star", "method", "wall_seconds"]
COMPONENT_COLUMNS = ["state", "delta_star"]
BENCH_COLUMNS = ["property", "n_states", "n_params", "method", "synth_seconds", "opt_seconds",
                 "total_seconds", "delta_star", "timeout"]
SPREAD_TOLERANCE = 1e-9


def parse_epsilons(text: str) -> List[float]:
    """Either a list `0,0.05,0.1` or a range `start:stop:step` (stop included)"""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(part) for part in text.split(":"))
        if step <= 0:
            raise ValueError("epsilon step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9))
        return [round(start + i * step, 12) for i in range(count + 1)]
    return [float(part) for part in text.split(",") if part.strip()]


class SweepSpec(BaseModel):
    epsilons: List[float]
    kind: ThreatKind
    vulnerable_states: Optional[List[int]] = None
    vulnerable_transitions: Optional[List[Tuple[int, int]]] = None
    prop: str
    method: str = "direct"
    seed: int = 42

    @field_validator("epsilons")
    @classmethod
    def _ascending_unit(cls, values: List[float]) -> List[float]:
        if any(not 0.0 <= e <= 1.0 for e in values):
            raise ValueError("epsilons must lie in [0, 1]")
        if any(b < a for a, b in zip(values, values[1:])):
            raise ValueError("epsilons must be ascending")
        return values

    def threat(self, epsilon: float) -> ThreatModel:
        return ThreatModel(
            kind=self.kind,
            epsilon=epsilon,
            vulnerable_states=tuple(self.vulnerable_states) if self.vulnerable_states is not None else None,
            vulnerable_transitions=(
                tuple(tuple(t) for t in self.vulnerable_transitions)
                if self.vulnerable_transitions is not None else None
            ),
        )


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    """Run cells, possibly on a pool; results keep input order"""
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def sweep(model: Dtmc, spec: SweepSpec, opts: Optional[OptimizerOptions] = None, workers: int = 1) -> List[dict]:
    phi = parse_property(spec.prop)
    base_opts = opts or OptimizerOptions(seed=spec.seed)

    def cell(item):
        i, epsilon = item
        cell_opts = base_opts.model_copy(update={"seed": derive_seed(spec.seed, "sweep", i)})
        result = AttackSynthesizer(cell_opts).run(model, spec.threat(epsilon), phi, spec.method)
        logger.info(f"Sweep eps={epsilon}: delta*={result.delta_star:.10g}")
        return {
            "epsilon": epsilon,
            "pr_original": result.pr_original,
            "pr_perturbed": result.pr_perturbed,
            "delta_star": result.delta_star,
            "method": result.method,
            "wall_seconds": result.wall_seconds,
        }

    return _map(cell, list(enumerate(spec.epsilons)), workers)


def component_rows(model: Dtmc, kind: ThreatKind, epsilon: float, prop: str, method: str = "direct",
                   opts: Optional[OptimizerOptions] = None, workers: int = 1) -> List[dict]:
    result = component_sweep(model, kind, epsilon, parse_property(prop), method, opts, workers=workers)
    return [{"state": s, "delta_star": d} for s, d in enumerate(result.deltas)]


def select_transitions(model: Dtmc, count: int, seed: int, phi: PathFormula) -> List[Tuple[int, int]]:
    """Pick `count` transitions for a selected-transitions attack on phi.

    Rows are taken in a seeded order among reachable states with 0 < Pr < 1
    whose successors differ in Pr, so moving mass within the row changes the
    result. Each chosen row keeps at least two transitions, including its
    best and worst successor. A single leftover pair goes to the first chosen
    row as a zero-base transition.
    """
    if count <= 0:
        return []
    values = sat_prob_all_states(model, phi)
    rng = np.random.default_rng(derive_seed(seed, "bench", model.n, count))
    candidates = []
    for s in sorted(model.reachable_from()):
        successors = [values[t] for t, _ in model.rows[s]]
        if len(successors) >= 2 and 0.0 < values[s] < 1.0 and max(successors) - min(successors) > SPREAD_TOLERANCE:
            candidates.append(s)
    order = [candidates[i] for i in rng.permutation(len(candidates))]
    chosen: List[Tuple[int, int]] = []
    remaining = count
    for s in order:
        if remaining <= 0:
            break
        ranked = sorted((t for t, _ in model.rows[s]), key=lambda t: (values[t], t))
        targets = [ranked[-1], ranked[0]] + ranked[1:-1]
        take = min(len(targets), remaining)
        if take < 2:
            break
        if remaining - take == 1 and take > 2:
            take -= 1
        chosen.extend((s, t) for t in targets[:take])
        remaining -= take
    if remaining > 0 and chosen:
        first = chosen[0][0]
        used = {t for s, t in chosen if s == first}
        zero_base = [t for t in range(model.n) if model.prob(first, t) == 0.0 and t not in used]
        for t in zero_base[:remaining]:
            chosen.append((first, t))
            remaining -= 1
    if remaining > 0:
        logger.warning(f"Only {len(chosen)} of {count} transitions available")
    return sorted(chosen)


def bench(sizes: Iterable[int], params: Iterable[int], methods: Iterable[str], epsilon: float = 0.05,
          timeout: float = 900.0, seed: int = 42, opts: Optional[OptimizerOptions] = None,
          max_terms: Optional[int] = None, workers: int = 1) -> List[dict]:
    """Direct vs symbolic on seeded gridworlds; timeouts and overflows become rows"""
    cells = []
    for size in sizes:
        spec = GridSpec.table(size, seed=seed)
        mdp, policy = random_gridworld(spec)
        model = compose(mdp, policy)
        prop = f"P=? [ s!={size} U s={size * size - 1} ]"
        phi = parse_property(prop)
        for count in params:
            pairs = select_transitions(model, count, seed, phi)
            for method in methods:
                cells.append((model, prop, tuple(pairs), method))

    base_opts = opts or OptimizerOptions(seed=seed)

    def cell(item):
        model, prop, pairs, method = item
        row = {"property": prop, "n_states": model.n, "n_params": len(pairs), "method": method,
               "synth_seconds": "", "opt_seconds": "", "total_seconds": "", "delta_star": "", "timeout": ""}
        tm = ThreatModel(kind=ThreatKind.ST, epsilon=epsilon, vulnerable_transitions=pairs)
        cell_opts = base_opts.model_copy(update={"timeout_seconds": timeout})
        start = time.time()
        try:
            result = AttackSynthesizer(cell_opts, max_terms=max_terms).run(model, tm, parse_property(prop), method)
        except SolverTimeout as e:
            row["timeout"] = e.phase
            row["total_seconds"] = time.time() - start
            logger.warning(f"Bench {prop} {len(pairs)} params {method}: timed out in {e.phase}")
            return row
        except DegreeOverflow as e:
            row["timeout"] = "degree-overflow"
            row["total_seconds"] = time.time() - start
            logger.warning(f"Bench {prop} {len(pairs)} params {method}: {e}")
            return row
        if method == "symbolic":
            row["synth_seconds"] = result.synthesis_seconds
        row["opt_seconds"] = result.optimization_seconds
        row["total_seconds"] = result.wall_seconds
        row["delta_star"] = result.delta_star
        logger.info(f"Bench {prop} {len(pairs)} params {method}: delta*={result.delta_star:.10g}")
        return row

    return _map(cell, cells, workers)


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(handle: TextIO, columns: Sequence[str], rows: Iterable[dict]) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])


def write_matrix(handle: TextIO, matrix: np.ndarray) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    n = matrix.shape[0]
    writer.writerow(["state"] + [str(t) for t in range(n)])
    for s in range(n):
        writer.writerow([str(s)] + [repr(float(v)) for v in matrix[s]])


def write_heatmaps(prefix: str, model: Dtmc, x: PerturbationMatrix) -> List[Path]:
    """PREFIX_original.csv, PREFIX_perturbation.csv and PREFIX_perturbed.csv"""
    perturbed = apply_perturbation(model, x)
    outputs = []
    for suffix, matrix in (
        ("original", model.dense()),
        ("perturbation", x.dense(model.n)),
        ("perturbed", perturbed.dense()),
    ):
        path = Path(f"{prefix}_{suffix}.csv")
        with path.open("w", encoding="utf-8", newline="") as handle:
            write_matrix(handle, matrix)
        outputs.append(path)
    return outputs
