from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Label(str, Enum):
    RECURRENT = "Recurrent"
    TRANSIENT = "Transient"
    INCONCLUSIVE = "Inconclusive"

    @property
    def definite(self) -> bool:
        return self is not Label.INCONCLUSIVE


@dataclass
class Verdict:
    """One criterion's answer.

    ``margin`` is ``theta - 1`` where ``theta`` is the criterion's ratio
    against its recurrence boundary (negative on the recurrent side).
    """

    label: Label
    criterion: str
    margin: float
    evidence: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "label": self.label.value,
            "criterion": self.criterion,
            "margin": self.margin,
            "evidence": self.evidence,
            "notes": list(self.notes),
        }
