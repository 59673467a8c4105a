"""Ground truth and losses for the auxiliary heads: human count, positions,
future trajectories and per-human risk."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import M_MAX


@dataclass(frozen=True)
class RiskParams:
    d_danger: float = 2.0
    d_safe: float = 4.0

    def __post_init__(self):
        if not 0.0 < self.d_danger < self.d_safe:
            raise ValueError("need 0 < d_danger < d_safe")


@dataclass(frozen=True)
class CognitionTargets:
    count: int
    positions: np.ndarray  # (M, 2) agent frame
    futures: np.ndarray  # (M, H, 2) agent frame
    mask: np.ndarray  # (M,) bool
    risk: np.ndarray  # (M,)

    def to_dict(self):
        return {"count": self.count, "positions": self.positions.tolist(),
                "futures": self.futures.tolist(), "mask": self.mask.astype(int).tolist(),
                "risk": self.risk.tolist()}


def risk_score(d: float, params: RiskParams = RiskParams()) -> float:
    if d < params.d_danger:
        return 1.0
    if d < params.d_safe:
        return (params.d_safe - d) / (params.d_safe - params.d_danger)
    return 0.0


def to_agent_frame(pose, points) -> np.ndarray:
    """Rotate by -heading after translating by -position.  ``points`` is ``(..., 2)``."""
    p = np.asarray(points, dtype=np.float64)
    c, s = math.cos(pose[2]), math.sin(pose[2])
    dx, dy = p[..., 0] - pose[0], p[..., 1] - pose[1]
    return np.stack([c * dx + s * dy, -s * dx + c * dy], axis=-1)


def from_agent_frame(pose, points) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    c, s = math.cos(pose[2]), math.sin(pose[2])
    return np.stack([c * p[..., 0] - s * p[..., 1] + pose[0],
                     s * p[..., 0] + c * p[..., 1] + pose[1]], axis=-1)


def build_targets(agent_pose, crowd, human_futures, H: int,
                  params: RiskParams = RiskParams(), m_max: int = M_MAX) -> CognitionTargets:
    """Slots follow ascending human id.  ``crowd`` is a CrowdState or an ``(n, 2)`` array of
    positions already in id order; ``human_futures`` is ``(n, H, 2)`` in world coordinates."""
    if H < 1:
        raise ValueError("H must be >= 1")
    if hasattr(crowd, "humans"):
        order = sorted(range(crowd.n), key=lambda i: crowd.humans[i].id)
        pos = crowd.positions()[order] if order else np.zeros((0, 2))
    else:
        order = None
        pos = np.asarray(crowd, dtype=np.float64).reshape(-1, 2)
    n = len(pos)
    if n > m_max:
        raise ValueError(f"{n} humans exceed the {m_max} slots")
    fut = np.asarray(human_futures, dtype=np.float64).reshape(n, -1, 2) if n else np.zeros((0, H, 2))
    if order is not None and n:
        fut = fut[order]
    if fut.shape[1] != H:
        raise ValueError(f"expected {H} future steps, got {fut.shape[1]}")
    positions = np.zeros((m_max, 2))
    futures = np.zeros((m_max, H, 2))
    mask = np.zeros(m_max, dtype=bool)
    risk = np.zeros(m_max)
    if n:
        positions[:n] = to_agent_frame(agent_pose, pos)
        futures[:n] = to_agent_frame(agent_pose, fut)
        mask[:n] = True
        d = np.hypot(pos[:, 0] - agent_pose[0], pos[:, 1] - agent_pose[1])
        risk[:n] = [risk_score(float(x), params) for x in d]
    return CognitionTargets(n, positions, futures, mask, risk)


def _log_softmax(z):
    z = np.asarray(z, dtype=np.float64)
    m = z.max(axis=-1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


def count_loss(pred_logits, true_count: int) -> float:
    logits = np.asarray(pred_logits, dtype=np.float64)
    if not 0 <= true_count < logits.shape[-1]:
        raise ValueError("true_count out of range")
    return float(-_log_softmax(logits)[true_count])


def position_loss(pred, targets: CognitionTargets) -> float:
    if targets.count == 0:
        return 0.0
    m = targets.mask
    err = np.asarray(pred, dtype=np.float64)[m] - targets.positions[m]
    return float((err**2).sum() / m.sum())


def trajectory_loss(pred, targets: CognitionTargets) -> float:
    if targets.count == 0:
        return 0.0
    m = targets.mask
    err = np.asarray(pred, dtype=np.float64).reshape(targets.futures.shape)[m] - targets.futures[m]
    return float((err**2).sum() / m.sum())


def risk_weights(targets: CognitionTargets) -> np.ndarray:
    return 1.0 + targets.risk


def risk_loss(pred_risk, targets: CognitionTargets) -> float:
    """Weighted squared error over every slot, weight ``1 + r_true``; empty slots target 0."""
    w = risk_weights(targets)
    err = np.asarray(pred_risk, dtype=np.float64) - targets.risk
    return float((w * err**2).sum() / w.sum())
