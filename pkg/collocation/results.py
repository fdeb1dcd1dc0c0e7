"""Result records produced at the various stages of a collocation run."""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np


class FixedPointStatus(str, Enum):
    FOUND = "found"
    NONE_IN_BRACKET = "none_in_bracket"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class FixedPointOutcome:
    """Result of a minimum nonzero fixed point search."""

    status: FixedPointStatus
    y_star: Optional[float] = None
    residual: Optional[float] = None
    roots_detected: int = 0

    @property
    def found(self) -> bool:
        return self.status is FixedPointStatus.FOUND


@dataclass(frozen=True)
class StepDiagnostics:
    """Per-step record kept on a solution."""

    step: int
    method: str  # "case1", "case2" or "general"
    roots_detected: int
    residual: float
    nondivergent_selection: bool = True
    iterations: int = 0


@dataclass
class StepState:
    """Lag terms and chosen coefficients of one collocation step."""

    n: int
    lag_terms: np.ndarray
    coefficients: np.ndarray
    outcome: Optional[FixedPointOutcome]
    diagnostics: StepDiagnostics


class ExistenceCategory(str, Enum):
    NO_NONTRIVIAL = "no_nontrivial"
    NEAR_ZERO = "near_zero"
    FINE_MESHES = "fine_meshes"
    UNCONDITIONAL = "unconditional"
    UNKNOWN = "unknown"

    @property
    def rank(self) -> int:
        """Strength ordering: unconditional > fine_meshes > near_zero."""
        return {
            ExistenceCategory.UNKNOWN: -1,
            ExistenceCategory.NO_NONTRIVIAL: 0,
            ExistenceCategory.NEAR_ZERO: 1,
            ExistenceCategory.FINE_MESHES: 2,
            ExistenceCategory.UNCONDITIONAL: 3,
        }[self]

    @property
    def has_existence(self) -> bool:
        return self.rank >= 1


@dataclass(frozen=True)
class RuleMatch:
    """A classification rule that fired, with the hypotheses it matched."""

    rule: str
    hypotheses: Tuple[str, ...]
    conclusion: str

    def __str__(self):
        return f"{self.rule}: {' & '.join(self.hypotheses)} => {self.conclusion}"


@dataclass
class ExistenceReport:
    """Existence, uniqueness and nondivergence classification."""

    case: Optional[int]
    category: ExistenceCategory = ExistenceCategory.UNKNOWN
    uniqueness: Optional[bool] = None
    nondivergent_existence: Optional[bool] = None
    nondivergent_uniqueness: Optional[bool] = None
    rules: List[RuleMatch] = field(default_factory=list)
    guarantees: List[str] = field(default_factory=list)

    def as_rows(self) -> List[Tuple[str, str]]:
        """Key/value rows for reporting."""

        def fmt(flag: Optional[bool]) -> str:
            return "unknown" if flag is None else str(flag).lower()

        rows = [
            ("case", "none" if self.case is None else str(self.case)),
            ("category", self.category.value),
            ("uniqueness", fmt(self.uniqueness)),
            ("nondivergent_existence", fmt(self.nondivergent_existence)),
            ("nondivergent_uniqueness", fmt(self.nondivergent_uniqueness)),
        ]
        rows.extend(("rule", str(rule)) for rule in self.rules)
        rows.extend(("guarantee", text) for text in self.guarantees)
        return rows


class ProbeVerdict(str, Enum):
    BOUNDED = "bounded"
    DIVERGING = "diverging"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class NondivergenceDiagnostic:
    """First-step minimum fixed point values along a shrinking h_0 schedule.

    ``values[k]`` is None where step 0 had no nontrivial solution and
    +inf where the root escaped past the scan cap.
    """

    schedule: Tuple[float, ...]
    values: Tuple[Optional[float], ...]
    verdict: ProbeVerdict

    @property
    def failures(self) -> int:
        return sum(v is None for v in self.values)


@dataclass
class SweepRow:
    case: int
    m: int
    h: float
    c: float
    relative_error: Optional[float]
    runtime: float
    status: str = "ok"  # "ok" or "failed"
    message: str = ""


@dataclass(frozen=True)
class SweepOptimum:
    h: float
    argmin_c: float
    min_error: float
    argmax_c: float
    max_error: float


@dataclass
class SweepResult:
    rows: List[SweepRow] = field(default_factory=list)
    optima: List[SweepOptimum] = field(default_factory=list)
    rate_ratios: List[Tuple[float, float, float, float]] = field(default_factory=list)

    def optimum_for(self, h: float) -> Optional[SweepOptimum]:
        for optimum in self.optima:
            if np.isclose(optimum.h, h, rtol=1e-12, atol=0.0):
                return optimum
        return None


@dataclass(frozen=True)
class OptimumCheck:
    """One table cell compared against its expected value."""

    h: float
    kind: str  # "max" or "min"
    error: Optional[float]
    c: Optional[float]
    expected_error: float
    expected_c: float
    passed: bool
