"""Shaped social-navigation reward: progress, collisions, proximity and path blocking."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class RewardWeights:
    beta_d: float = 1.0
    r_slack: float = 0.002
    beta_succ: float = 2.5
    beta_s: float = 0.02
    beta_h: float = 0.3
    beta_prox: float = 0.1
    beta_path: float = 0.1
    H: int = 8
    prox_range: float = 2.0
    path_radius: float = 0.05

    def __post_init__(self):
        for name in ("beta_d", "r_slack", "beta_succ", "beta_s", "beta_h", "beta_prox",
                     "beta_path"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if int(self.H) != self.H or self.H < 1:
            raise ValueError("H must be a positive integer")


@dataclass(frozen=True)
class StepOutcome:
    r_base: float
    r_coll: float
    r_prox: float
    r_path: float
    r_total: float
    static_collision: bool = False
    human_collision: bool = False
    distances: tuple = field(default=())
    success: bool = False

    def to_dict(self):
        return {"r_base": self.r_base, "r_coll": self.r_coll, "r_prox": self.r_prox,
                "r_path": self.r_path, "r_total": self.r_total,
                "static_collision": self.static_collision,
                "human_collision": self.human_collision,
                "distances": list(self.distances), "success": self.success}


def base_reward(dist_prev: float, dist_now: float, success: bool, w: RewardWeights) -> float:
    """Progress shaping; getting closer (negative change) is rewarded."""
    if not (math.isfinite(dist_prev) and math.isfinite(dist_now)):
        raise ContractError("geodesic distance to goal is not finite")
    delta = dist_now - dist_prev
    return -w.beta_d * delta - w.r_slack + (w.beta_succ if success else 0.0)


def collision_penalty(static_coll: bool, human_coll: bool, w: RewardWeights) -> float:
    return (w.beta_s if static_coll else 0.0) + (w.beta_h if human_coll else 0.0)


def proximity_penalty(distances, w: RewardWeights) -> float:
    total = 0.0
    for d in distances:
        if d < 0:
            raise ContractError("negative human distance")
        if d < w.prox_range:
            total += w.beta_prox * math.exp(-d)
    return total


def path_blocking_weights(H: int) -> np.ndarray:
    """Weight of the k-th future step, k = 1..H (offset from now), is 1/(k+1)."""
    return 1.0 / (np.arange(1, H + 1) + 1.0)


def path_blocking_penalty(agent_pos, human_futures, w: RewardWeights) -> float:
    """``human_futures`` is ``(n, H, 2)``: each human's positions at steps t+1..t+H."""
    fut = np.asarray(human_futures, dtype=np.float64)
    if fut.size == 0:
        return 0.0
    fut = fut.reshape(fut.shape[0], -1, 2)
    if fut.shape[1] != w.H:
        raise ContractError(f"expected {w.H} future steps per human, got {fut.shape[1]}")
    d = np.hypot(fut[..., 0] - agent_pos[0], fut[..., 1] - agent_pos[1])
    hits = d < w.path_radius
    weights = path_blocking_weights(w.H)
    total = 0.0
    # explicit loop keeps the summation order fixed
    for i in range(fut.shape[0]):
        for k in range(w.H):
            if hits[i, k]:
                total += w.beta_path * weights[k]
    return total


def total_reward(r_base: float, r_coll: float, r_prox: float, r_path: float) -> float:
    return r_base - (r_coll + r_prox + r_path)


def step_outcome(dist_prev: float, dist_now: float, success: bool, static_coll: bool,
                 human_coll: bool, distances, agent_pos, human_futures,
                 w: RewardWeights) -> StepOutcome:
    rb = base_reward(dist_prev, dist_now, success, w)
    rc = collision_penalty(static_coll, human_coll, w)
    rp = proximity_penalty(distances, w)
    rpath = path_blocking_penalty(agent_pos, human_futures, w)
    return StepOutcome(rb, rc, rp, rpath, total_reward(rb, rc, rp, rpath), bool(static_coll),
                       bool(human_coll), tuple(float(d) for d in distances), bool(success))
