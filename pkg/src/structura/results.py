"""Shared result records for the inference backends."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .graphs import Assignment
from .scoring import ScoreBreakdown


@dataclass
class Telemetry:
    restarts_used: int = 0
    moves_evaluated: int = 0
    accepted_moves: int = 0
    wall_time_s: float = 0.0
    truncated: bool = False
    score_trace: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "restarts_used": self.restarts_used,
            "moves_evaluated": self.moves_evaluated,
            "accepted_moves": self.accepted_moves,
            "wall_time_s": self.wall_time_s,
            "truncated": self.truncated,
        }


@dataclass
class InferenceResult:
    assignment: Assignment
    breakdown: ScoreBreakdown
    telemetry: Telemetry
    proven_optimal: bool = False
    backend: str = ""

    @property
    def score(self) -> float:
        return self.breakdown.total
