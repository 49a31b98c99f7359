from pydantic import BaseModel, ConfigDict, Field
from typing import Dict, List, Literal, Optional, Tuple

from advmc.models.threat import ThreatKind, ThreatModel


class TransitionRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    source: int = Field(alias="from")
    action: Optional[str] = None
    to: int
    p: float


class ModelFile(BaseModel):
    type: Literal["dtmc", "mdp"]
    n: int = Field(gt=0)
    init: int
    atoms: List[str] = []
    labels: Dict[str, List[str]] = {}
    actions: Optional[List[str]] = None
    transitions: List[TransitionRecord]
    policy: Optional[Dict[str, str]] = None


class ThreatFile(BaseModel):
    """Threat-spec file; epsilon may be left out for sweep templates"""
    kind: ThreatKind
    epsilon: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    vulnerable_states: Optional[List[int]] = None
    vulnerable_transitions: Optional[List[Tuple[int, int]]] = None

    def to_threat(self, epsilon: Optional[float] = None) -> ThreatModel:
        value = epsilon if epsilon is not None else self.epsilon
        if value is None:
            raise ValueError("threat file has no epsilon and none was supplied")
        return ThreatModel(
            kind=self.kind,
            epsilon=value,
            vulnerable_states=tuple(self.vulnerable_states) if self.vulnerable_states is not None else None,
            vulnerable_transitions=(
                tuple(tuple(pair) for pair in self.vulnerable_transitions)
                if self.vulnerable_transitions is not None else None
            ),
        )
