from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field

from advmc.models.chain import Dtmc, PerturbationMatrix
from advmc.models.threat import ThreatModel


class OptimizerOptions(BaseModel):
    max_iterations: int = Field(default=200, gt=0)
    objective_tolerance: float = Field(default=1e-8, gt=0)
    step_tolerance: float = Field(default=1e-10, gt=0)
    starts: int = Field(default=5, ge=1)
    fd_step: float = Field(default=1e-6, gt=0)
    seed: int = 42
    solver: Literal["pgd", "slsqp"] = "pgd"
    workers: int = Field(default=1, ge=1)
    timeout_seconds: Optional[float] = Field(default=None, gt=0)


@dataclass
class StartTrace:
    index: int
    iterations: int
    objective: float
    converged: bool
    history: List[float] = field(default_factory=list)


@dataclass
class AttackResult:
    x_star: PerturbationMatrix
    pr_original: float
    pr_perturbed: float
    delta_star: float
    method: str
    starts: int = 0
    iterations: int = 0
    wall_seconds: float = 0.0
    synthesis_seconds: float = 0.0
    converged: List[bool] = field(default_factory=list)
    traces: List[StartTrace] = field(default_factory=list)

    @property
    def optimization_seconds(self) -> float:
        return max(self.wall_seconds - self.synthesis_seconds, 0.0)


@dataclass
class VerifyResult:
    robust: bool
    delta: float
    attack: AttackResult
    witness: Optional[Dtmc] = None


@dataclass
class ComponentSweep:
    deltas: List[float]
    errors: Dict[int, str] = field(default_factory=dict)


class TraceRecord(BaseModel):
    index: int
    iterations: int
    objective: float
    converged: bool
    history: List[float] = []


class AttackReport(BaseModel):
    """Attack result file"""
    x_star: List[Tuple[int, int, float]]
    pr_original: float
    pr_perturbed: float
    delta_star: float
    method: str
    starts: int
    iterations: int
    wall_seconds: float
    synthesis_seconds: float = 0.0
    converged: List[bool] = []
    threat: ThreatModel
    property: str
    traces: List[TraceRecord] = []

    @classmethod
    def from_result(cls, result: AttackResult, threat: ThreatModel, prop: str) -> "AttackReport":
        return cls(
            x_star=[(s, t, d) for (s, t), d in result.x_star],
            pr_original=result.pr_original,
            pr_perturbed=result.pr_perturbed,
            delta_star=result.delta_star,
            method=result.method,
            starts=result.starts,
            iterations=result.iterations,
            wall_seconds=result.wall_seconds,
            synthesis_seconds=result.synthesis_seconds,
            converged=list(result.converged),
            threat=threat,
            property=prop,
            traces=[
                TraceRecord(index=t.index, iterations=t.iterations, objective=t.objective,
                            converged=t.converged, history=list(t.history))
                for t in result.traces
            ],
        )
