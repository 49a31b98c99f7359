from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ThreatKind(str, Enum):
    ST = "ST"
    SPST = "SPST"
    SS = "SS"
    SPSS = "SPSS"

    @property
    def structure_preserving(self) -> bool:
        return self in (ThreatKind.SPST, ThreatKind.SPSS)

    @property
    def by_state(self) -> bool:
        return self in (ThreatKind.SS, ThreatKind.SPSS)


class ThreatModel(BaseModel):
    """An epsilon,max-bounded threat model over selected states or transitions"""
    model_config = ConfigDict(frozen=True)

    kind: ThreatKind
    epsilon: float = Field(ge=0.0, le=1.0)
    vulnerable_states: Optional[Tuple[int, ...]] = None
    vulnerable_transitions: Optional[Tuple[Tuple[int, int], ...]] = None

    @model_validator(mode="after")
    def _one_vulnerable_set(self):
        if self.kind.by_state:
            if self.vulnerable_states is None or self.vulnerable_transitions is not None:
                raise ValueError(f"{self.kind.value} needs vulnerable_states only")
        else:
            if self.vulnerable_transitions is None or self.vulnerable_states is not None:
                raise ValueError(f"{self.kind.value} needs vulnerable_transitions only")
        return self

    def with_epsilon(self, epsilon: float) -> "ThreatModel":
        return ThreatModel(
            kind=self.kind,
            epsilon=epsilon,
            vulnerable_states=self.vulnerable_states,
            vulnerable_transitions=self.vulnerable_transitions,
        )

    def describe(self) -> str:
        if self.kind.by_state:
            target = "{" + ",".join(str(s) for s in self.vulnerable_states) + "}"
        else:
            target = "{" + ",".join(f"({s},{t})" for s, t in self.vulnerable_transitions) + "}"
        return f"{self.kind.value} eps={self.epsilon} on {target}"


@dataclass(frozen=True)
class FreeVariable:
    source: int
    target: int
    base: float
    lower: float
    upper: float
    frozen: bool = False

    @property
    def transition(self) -> Tuple[int, int]:
        return (self.source, self.target)

    @property
    def name(self) -> str:
        return f"v{self.source}_{self.target}"

    @property
    def box(self) -> Tuple[float, float]:
        """Effective bounds; a frozen variable is pinned to its base"""
        if self.frozen:
            return (self.base, self.base)
        return (self.lower, self.upper)

    @property
    def active(self) -> bool:
        return not self.frozen and self.upper > self.lower


class IdtmcExport(BaseModel):
    lower: List[List[float]]
    upper: List[List[float]]
    notice: Optional[str] = None
