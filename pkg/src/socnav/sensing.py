"""Egocentric observations: ray depth, polar goal vector and odometry."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import SensorError
from .scene import Scene


@dataclass(frozen=True)
class SensorConfig:
    rays: int = 64
    fov: float = math.pi / 2
    d_max: float = 5.0
    noise_std: float = 0.0  # Gaussian depth noise, off by default


@dataclass(frozen=True)
class Observation:
    depth: np.ndarray  # (R,) metres in [0, d_max]
    goal: tuple  # (rho, theta) in the agent frame
    odom_pose: tuple  # (x, y, heading) relative to the start pose

    def as_vector(self) -> np.ndarray:
        rho, theta = self.goal
        return np.concatenate([self.depth, [rho, theta, math.sin(theta), math.cos(theta)]])


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def ray_angles(heading: float, fov: float, rays: int) -> np.ndarray:
    if rays < 1:
        raise ValueError("rays must be >= 1")
    if not 0.0 < fov <= 2.0 * math.pi:
        raise ValueError("fov must lie in (0, 2*pi]")
    if rays == 1:
        return np.array([heading])
    return heading - fov / 2 + np.arange(rays) * (fov / (rays - 1))


def raycast_depth(scene: Scene, crowd, pose, fov: float = math.pi / 2, rays: int = 64,
                  d_max: float = 5.0) -> np.ndarray:
    """Distance along each ray to the first wall cell or human disc, clipped to ``d_max``.

    ``crowd`` is a CrowdState, an ``(n, 3)`` array of discs, or None.
    """
    x, y, heading = float(pose[0]), float(pose[1]), float(pose[2])
    row, col = scene.cell_of((x, y))
    if not scene.in_bounds(row, col) or scene.occupied[row, col]:
        raise SensorError(f"sensor pose ({x:.3f}, {y:.3f}) is inside an occupied cell")
    angles = ray_angles(heading, fov, rays)
    if crowd is None:
        discs = np.zeros((0, 3))
    elif hasattr(crowd, "discs"):
        discs = crowd.discs()
    else:
        discs = np.asarray(crowd, dtype=np.float64).reshape(-1, 3)
    return np.asarray(kernels.raycast(scene.occupied, scene.cell_size, x, y, angles, float(d_max),
                                      np.ascontiguousarray(discs, dtype=np.float64)))


def goal_vector(agent_pose, goal_position) -> tuple:
    """``(rho, theta)`` with theta counter-clockwise from the agent heading."""
    dx = float(goal_position[0]) - float(agent_pose[0])
    dy = float(goal_position[1]) - float(agent_pose[1])
    rho = math.hypot(dx, dy)
    if rho == 0.0:
        return 0.0, 0.0
    return rho, wrap_angle(math.atan2(dy, dx) - float(agent_pose[2]))


def relative_pose(start_pose, pose) -> tuple:
    """Pose expressed in the frame of ``start_pose`` (what wheel odometry reports)."""
    dx, dy = pose[0] - start_pose[0], pose[1] - start_pose[1]
    c, s = math.cos(start_pose[2]), math.sin(start_pose[2])
    return (c * dx + s * dy, -s * dx + c * dy, wrap_angle(pose[2] - start_pose[2]))


def observe(scene: Scene, crowd, pose, goal, start_pose, config: SensorConfig = SensorConfig(),
            rng: np.random.Generator | None = None) -> Observation:
    depth = raycast_depth(scene, crowd, pose, config.fov, config.rays, config.d_max)
    if config.noise_std > 0.0:
        if rng is None:
            raise ValueError("depth noise needs an rng")
        depth = np.clip(depth + rng.normal(0.0, config.noise_std, depth.shape), 0.0, config.d_max)
    return Observation(depth=depth, goal=goal_vector(pose, goal),
                       odom_pose=relative_pose(start_pose, pose))
