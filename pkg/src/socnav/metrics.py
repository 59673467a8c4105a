"""Episode-level evaluation: SR, SPL, PSC, human-collision rate and the weighted total."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import RecordError

SUCCESS_RADIUS = 1.0
PERSONAL_SPACE = 0.5
TOTAL_WEIGHTS = (0.4, 0.3, 0.3)


@dataclass(frozen=True)
class EpisodeRecord:
    success: bool
    shortest_path: float
    actual_path: float
    min_human_distance: tuple = field(default=())  # per step; inf when no humans
    human_collision: bool = False
    steps: int = 0

    def __post_init__(self):
        if self.actual_path < 0:
            raise RecordError("actual path length is negative")
        if len(self.min_human_distance) != self.steps:
            raise RecordError(f"{len(self.min_human_distance)} distances for {self.steps} steps")

    def to_dict(self):
        return {"success": self.success, "shortest_path": self.shortest_path,
                "actual_path": self.actual_path,
                "min_human_distance": [d if math.isfinite(d) else None
                                       for d in self.min_human_distance],
                "human_collision": self.human_collision, "steps": self.steps}

    @classmethod
    def from_dict(cls, d):
        return cls(bool(d["success"]), float(d["shortest_path"]), float(d["actual_path"]),
                   tuple(math.inf if x is None else float(x) for x in d["min_human_distance"]),
                   bool(d["human_collision"]), int(d["steps"]))


@dataclass(frozen=True)
class MetricsSummary:
    sr: float
    spl: float
    psc: float
    h_coll: float
    total: float
    episodes: int = 0


def episode_success(final_agent_pos, goal, human_collision: bool, stopped: bool,
                    timed_out: bool = False) -> bool:
    """Inside the success radius (strictly) at STOP or at the step limit, with no human contact."""
    if human_collision or not (stopped or timed_out):
        return False
    d = math.hypot(final_agent_pos[0] - goal[0], final_agent_pos[1] - goal[1])
    return d < SUCCESS_RADIUS


def _spl_term(r: EpisodeRecord) -> float:
    if not r.shortest_path > 0:
        raise RecordError(f"shortest path must be positive, got {r.shortest_path}")
    if not r.success:
        return 0.0
    return r.shortest_path / max(r.actual_path, r.shortest_path)


def spl(records) -> float:
    records = list(records)
    if not records:
        return 0.0
    return sum(_spl_term(r) for r in records) / len(records)


def episode_psc(r: EpisodeRecord) -> float:
    if r.steps == 0:
        return 1.0
    ok = sum(1 for d in r.min_human_distance if d >= PERSONAL_SPACE)
    return ok / r.steps


def psc(records) -> float:
    records = list(records)
    if not records:
        return 0.0
    return sum(episode_psc(r) for r in records) / len(records)


def success_rate(records) -> float:
    records = list(records)
    return sum(r.success for r in records) / len(records) if records else 0.0


def h_coll(records) -> float:
    records = list(records)
    return sum(r.human_collision for r in records) / len(records) if records else 0.0


def total_score(sr: float, spl_: float, psc_: float) -> float:
    a, b, c = TOTAL_WEIGHTS
    return a * sr + b * spl_ + c * psc_


def summarize(records) -> MetricsSummary:
    records = list(records)
    s, p, c = success_rate(records), spl(records), psc(records)
    return MetricsSummary(s, p, c, h_coll(records), total_score(s, p, c), len(records))
