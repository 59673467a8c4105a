"""Single-robot episode simulator: sense, act, move, step the crowd, score."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .crowd import DEFAULT_PARAMS as DEFAULT_CROWD
from .crowd import CrowdParams, CrowdState, forecast, spawn_crowd, step_crowd
from .errors import ContractError, PlacementError, SetupError
from .metrics import EpisodeRecord, episode_success
from .policy import FORWARD, STOP, TURN_LEFT, TURN_RIGHT
from .reward import RewardWeights, StepOutcome, step_outcome
from .scene import (Scene, corridor_scene, generate_scene, geodesic_field, human_count_for_area,
                    sample_free_position)
from .sensing import Observation, SensorConfig, observe, wrap_angle
from .targets import CognitionTargets, RiskParams, build_targets


@dataclass(frozen=True)
class EpisodeConfig:
    scene_seed: int = 0
    size_class: str = "medium"  # small | medium | large | corridor
    episode_seed: int = 0
    humans: int | None = None  # None: banded by free area (corridor: 0)
    min_goal_distance: float = 3.0
    max_steps: int = 500
    dt: float = 0.25
    forward_step: float = 0.25
    turn_angle: float = math.radians(30.0)
    robot_radius: float = 0.25
    setup_retries: int = 50
    corridor_length: float = 8.0
    corridor_width: float = 2.0
    reward: RewardWeights = field(default_factory=RewardWeights)
    risk: RiskParams = field(default_factory=RiskParams)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    crowd: CrowdParams = DEFAULT_CROWD

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@lru_cache(maxsize=64)
def _scene(size_class: str, seed: int, length: float, width: float) -> Scene:
    if size_class == "corridor":
        return corridor_scene(length, width, seed)
    return generate_scene(seed, size_class)


def build_scene(cfg: EpisodeConfig) -> Scene:
    return _scene(cfg.size_class, int(cfg.scene_seed), cfg.corridor_length, cfg.corridor_width)


@dataclass
class StepResult:
    obs: Observation
    outcome: StepOutcome
    done: bool
    moved: float  # executed forward displacement (m)
    min_gap: float  # smallest body separation to any human, inf when alone


class SocNavEnv:
    """One episode at a time.  Construct, :meth:`reset`, then :meth:`step` until done."""

    def __init__(self, config: EpisodeConfig):
        self.config = config
        self.scene = build_scene(config)
        self.done = True

    # -- setup ---------------------------------------------------------------

    def reset(self) -> Observation:
        cfg = self.config
        rng = np.random.default_rng([int(cfg.episode_seed) & 0xFFFFFFFFFFFFFFFF,
                                     int(cfg.scene_seed) & 0xFFFFFFFFFFFFFFFF])
        scene = self.scene
        margin = cfg.robot_radius + 0.05
        for _ in range(cfg.setup_retries):
            try:
                goal = sample_free_position(scene, rng, margin)
                gfield = geodesic_field(scene, goal)
                body_field = geodesic_field(scene, goal, clearance=cfg.robot_radius)
                ok = (scene.clearance_mask(margin) & np.isfinite(body_field.dist)
                      & (gfield.dist >= cfg.min_goal_distance))
                start = sample_free_position(scene, rng, margin, mask=ok)
                heading = float(rng.uniform(-math.pi, math.pi))
                if cfg.humans is not None:
                    n = int(cfg.humans)
                elif scene.size_class == "corridor":
                    n = 0
                else:
                    n = human_count_for_area(scene.free_area, rng)
                crowd = spawn_crowd(scene, rng, n, robot_position=start,
                                    robot_radius=cfg.robot_radius, params=cfg.crowd)
            except PlacementError:
                continue
            break
        else:
            raise SetupError(f"no valid start/goal/crowd after {cfg.setup_retries} tries "
                             f"(scene {cfg.size_class}/{cfg.scene_seed}, "
                             f"episode {cfg.episode_seed})")
        self.goal = goal
        self.goal_field = gfield
        self.body_field = body_field
        self.pose = (float(start[0]), float(start[1]), heading)
        self.start_pose = self.pose
        self.crowd: CrowdState = crowd
        self.shortest_path = gfield.at(start)
        self.geo = self.shortest_path
        self.steps = 0
        self.path_length = 0.0
        self.gaps = []
        self.human_collision = False
        self.stopped = False
        self.success = False
        self.done = False
        self._refresh_futures()
        self.obs = self._observe()
        return self.obs

    def _observe(self) -> Observation:
        return observe(self.scene, self.crowd, self.pose, self.goal, self.start_pose,
                       self.config.sensor, self._noise_rng())

    def _noise_rng(self):
        if self.config.sensor.noise_std <= 0:
            return None
        return np.random.default_rng([int(self.config.episode_seed) & 0xFFFFFFFFFFFFFFFF,
                                      self.steps, 7])

    def _refresh_futures(self):
        cfg = self.config
        if self.crowd.n:
            self.futures = forecast(self.crowd, self.scene, self.pose[:2], cfg.robot_radius,
                                    cfg.dt, cfg.reward.H, cfg.crowd)
        else:
            self.futures = np.zeros((0, cfg.reward.H, 2))

    # -- dynamics ------------------------------------------------------------

    def try_forward(self, pose=None):
        """Pose after a forward step, or None when the swept disc meets a wall."""
        cfg = self.config
        x, y, h = self.pose if pose is None else pose
        dx, dy = cfg.forward_step * math.cos(h), cfg.forward_step * math.sin(h)
        n = max(int(math.ceil(cfg.forward_step / self.scene.cell_size)), 1)
        for k in range(1, n + 1):
            if not self.scene.disc_is_free((x + dx * k / n, y + dy * k / n), cfg.robot_radius):
                return None
        return (x + dx, y + dy, h)

    def human_distances(self) -> np.ndarray:
        x, y = self.pose[0], self.pose[1]
        return np.array([math.hypot(h.position[0] - x, h.position[1] - y)
                         for h in self.crowd.humans])

    def step(self, action: int) -> StepResult:
        if self.done:
            raise ContractError("episode is over; call reset()")
        cfg = self.config
        action = int(action)
        static = False
        moved = 0.0
        x0, y0, h0 = self.pose
        if action == FORWARD:
            nxt = self.try_forward()
            if nxt is None:
                static = True
            else:
                self.pose = nxt
                moved = cfg.forward_step
        elif action == TURN_LEFT:
            self.pose = (x0, y0, wrap_angle(h0 + cfg.turn_angle))
        elif action == TURN_RIGHT:
            self.pose = (x0, y0, wrap_angle(h0 - cfg.turn_angle))
        elif action == STOP:
            self.stopped = True
        else:
            raise ContractError(f"unknown action {action}")
        self.path_length += moved
        vel = ((self.pose[0] - x0) / cfg.dt, (self.pose[1] - y0) / cfg.dt)
        self.crowd = step_crowd(self.crowd, self.scene, (self.pose[:2], vel, cfg.robot_radius),
                                cfg.dt, cfg.crowd)
        self.steps += 1
        dists = self.human_distances()
        radii = np.array([h.radius for h in self.crowd.humans])
        gaps = dists - radii - cfg.robot_radius
        self.human_collision = bool(np.any(gaps < 0.0))
        min_gap = float(gaps.min()) if len(gaps) else math.inf
        self.gaps.append(min_gap)
        timed_out = self.steps >= cfg.max_steps
        self.done = self.stopped or self.human_collision or timed_out
        self.success = self.done and episode_success(self.pose, self.goal, self.human_collision,
                                                     self.stopped, timed_out)
        prev = self.geo
        self.geo = self.goal_field.at(self.pose)
        self._refresh_futures()
        outcome = step_outcome(prev, self.geo, self.success, static, self.human_collision, dists,
                               self.pose[:2], self.futures, cfg.reward)
        self.obs = self._observe()
        return StepResult(self.obs, outcome, self.done, moved, min_gap)

    # -- views ---------------------------------------------------------------

    def targets(self) -> CognitionTargets:
        cfg = self.config
        return build_targets(self.pose, self.crowd, self.futures, cfg.reward.H, cfg.risk)

    def record(self) -> EpisodeRecord:
        return EpisodeRecord(success=self.success, shortest_path=self.shortest_path,
                             actual_path=self.path_length, min_human_distance=tuple(self.gaps),
                             human_collision=self.human_collision, steps=self.steps)
