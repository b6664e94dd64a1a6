from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Optional


class SatStatus(str, Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SatResult:
    status: SatStatus
    model: Optional[Dict[str, Fraction]] = field(default=None, compare=False)
    reason: str = field(default="", compare=False)

    @property
    def is_sat(self) -> bool:
        return self.status is SatStatus.SAT

    @property
    def is_unsat(self) -> bool:
        return self.status is SatStatus.UNSAT

    @property
    def is_unknown(self) -> bool:
        return self.status is SatStatus.UNKNOWN


UNSAT = SatResult(SatStatus.UNSAT)
