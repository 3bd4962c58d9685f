from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from utils.io import to_jsonable

HOLD_TOL = 1e-9


def hold_threshold(rhs: float) -> float:
    return HOLD_TOL * (1.0 + abs(rhs))


@dataclass
class BoundReport:
    """One evaluated inequality lhs <= sum(rhs_terms).

    ``tolerance`` is the Monte Carlo allowance (3 standard errors) for the
    population bounds and 0 for the exact ones. ``holds`` is None when the
    constants are degenerate.
    """

    theorem    : str
    lhs        : float
    rhs_terms  : Dict[str, float]
    constants  : Dict[str, float]
    holds      : Optional[bool]
    slack      : float
    degenerate : bool              = False
    tolerance  : float             = 0.0
    seeds      : List[int]         = field(default_factory=list)
    notes      : List[str]         = field(default_factory=list)

    @property
    def rhs(self) -> float:
        return float(sum(self.rhs_terms.values()))

    @classmethod
    def build(cls, theorem: str, lhs: float, rhs_terms: Dict[str, float], constants: Dict[str, float],
              tolerance: float = 0.0, seeds=(), notes=()) -> "BoundReport":
        rhs_terms = {k: float(v) for k, v in rhs_terms.items()}
        rhs = float(sum(rhs_terms.values()))
        slack = rhs - float(lhs)
        holds = bool(slack >= -(hold_threshold(rhs) + tolerance))
        return cls(theorem, float(lhs), rhs_terms, {k: float(v) for k, v in constants.items()}, holds, slack,
                   False, float(tolerance), [int(s) for s in seeds], list(notes))

    @classmethod
    def degenerate_report(cls, theorem: str, reason: str, constants: Optional[Dict[str, float]] = None,
                          seeds=()) -> "BoundReport":
        return cls(theorem, float("nan"), {}, dict(constants or {}), None, float("nan"), True, 0.0,
                   [int(s) for s in seeds], [reason])

    def consistent(self) -> bool:
        """Recomputing slack/holds from rhs_terms gives the stored values."""
        if self.degenerate:
            return self.holds is None
        if abs((self.rhs - self.lhs) - self.slack) > 1e-12 * (1.0 + abs(self.rhs)):
            return False
        return self.holds == (self.slack >= -(hold_threshold(self.rhs) + self.tolerance))

    def to_dict(self) -> dict:
        return to_jsonable(asdict(self))

    def summary_row(self) -> dict:
        return {
            "theorem": self.theorem,
            "lhs": self.lhs,
            "rhs": self.rhs if not self.degenerate else float("nan"),
            "slack": self.slack,
            "holds": "" if self.holds is None else bool(self.holds),
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "BoundReport":
        def num(value):
            return float(value) if value is not None else float("nan")
        return cls(
            payload["theorem"], num(payload["lhs"]),
            {k: num(v) for k, v in payload.get("rhs_terms", {}).items()},
            {k: num(v) for k, v in payload.get("constants", {}).items()},
            payload.get("holds"), num(payload["slack"]), bool(payload.get("degenerate", False)),
            num(payload.get("tolerance", 0.0)), list(payload.get("seeds", [])), list(payload.get("notes", [])),
        )


@dataclass
class VerificationReport:
    inequality    : str
    normalization : str
    trials        : int
    violations    : int
    max_slack     : float
    min_slack     : float
    constants     : Dict[str, float] = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return to_jsonable(asdict(self))


class SlackTracker:
    """Accumulates rhs - lhs over trials."""

    def __init__(self) -> None:
        self.trials = 0
        self.violations = 0
        self.max_slack = -np.inf
        self.min_slack = np.inf

    def add(self, lhs: float, rhs: float) -> None:
        slack = rhs - lhs
        self.trials += 1
        self.max_slack = max(self.max_slack, slack)
        self.min_slack = min(self.min_slack, slack)
        if slack < -hold_threshold(rhs):
            self.violations += 1

    def report(self, inequality: str, normalization: str, constants: Dict[str, float]) -> VerificationReport:
        return VerificationReport(inequality, normalization, self.trials, self.violations,
                                  float(self.max_slack), float(self.min_slack), constants)
