"""Goal-directed human agents driven by ORCA.

Humans walk a cyclic list of waypoints, following the geodesic field of the
current waypoint and letting ORCA resolve conflicts with each other, the
robot and nearby walls.  On reaching a waypoint a human either moves on or
stands idle for a random number of ticks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import PlacementError
from .scene import Scene, geodesic_field, sample_free_position

WALKING = "walking"
IDLE = "idle"


@dataclass(frozen=True)
class CrowdParams:
    v_robot: float = 1.0
    speed_range: tuple = (0.8, 1.2)  # multiples of v_robot
    radius: float = 0.3
    time_horizon: float = 2.0
    obstacle_time_horizon: float = 1.0
    waypoint_tolerance: float = 0.2
    idle_ticks: tuple = (4, 40)
    idle_probability: float = 0.5
    waypoint_count: tuple = (2, 5)
    waypoint_gap: float = 2.0
    substeps: int = 2
    n_sectors: int = 16
    lookahead: float = 0.3
    neighbour_reach: float = 6.0
    spawn_robot_gap: float = 1.0
    spawn_margin: float = 0.05

    @property
    def obstacle_reach(self):
        return self.radius + self.speed_range[1] * self.v_robot * self.obstacle_time_horizon + 0.2


DEFAULT_PARAMS = CrowdParams()


@dataclass(frozen=True)
class HumanAgent:
    id: int
    position: np.ndarray
    velocity: np.ndarray
    radius: float
    pref_speed: float
    waypoints: tuple
    target: int = 0
    phase: str = WALKING
    idle_remaining: int = 0
    # geodesic fields (clearance = radius) of each waypoint, parallel to ``waypoints``
    fields: tuple = field(default=(), repr=False, compare=False)

    @property
    def current_waypoint(self):
        return self.waypoints[self.target]


@dataclass(frozen=True)
class CrowdState:
    """Crowd snapshot.  Randomness for tick ``t`` is drawn from ``(seed, t)``."""

    humans: tuple
    tick: int
    seed: int = 0

    @property
    def n(self):
        return len(self.humans)

    def positions(self) -> np.ndarray:
        if not self.humans:
            return np.zeros((0, 2))
        return np.array([h.position for h in self.humans])

    def discs(self) -> np.ndarray:
        """``(n, 3)`` array of ``x, y, radius`` used by the depth sensor."""
        if not self.humans:
            return np.zeros((0, 3))
        return np.array([(h.position[0], h.position[1], h.radius) for h in self.humans])


def orca_velocity(agent: HumanAgent, pref_velocity, neighbours, obstacles, time_horizon: float,
                  dt: float, obstacle_time_horizon: float | None = None,
                  responsibility=None, obstacle_radius: float = 0.05 * math.sqrt(2) / 2):
    """Velocity closest to ``pref_velocity`` satisfying every ORCA half-plane.

    ``neighbours`` is a sequence of ``(position, velocity, radius)``;
    ``obstacles`` an ``(m, 2)`` array of static disc centres.  Neighbours share
    avoidance equally unless ``responsibility`` says otherwise.  Falls back to
    the least-violating velocity when the constraints are infeasible.
    """
    if time_horizon <= 0:
        raise ValueError("time_horizon must be positive")
    nb = np.array([(p[0], p[1], v[0], v[1], r) for p, v, r in neighbours],
                  dtype=np.float64).reshape(-1, 5)
    resp = (np.full(len(nb), 0.5) if responsibility is None
            else np.asarray(responsibility, dtype=np.float64))
    obs = np.asarray(obstacles, dtype=np.float64).reshape(-1, 2)
    tau_obs = time_horizon if obstacle_time_horizon is None else obstacle_time_horizon
    v = kernels.orca_velocity(np.asarray(agent.position, dtype=np.float64),
                              np.asarray(agent.velocity, dtype=np.float64), agent.radius,
                              np.asarray(pref_velocity, dtype=np.float64), agent.pref_speed,
                              nb, resp, obs, obstacle_radius, time_horizon, tau_obs, 1.0 / dt)
    return np.array(v)


def waypoint_fields(scene: Scene, waypoints, radius):
    return tuple(geodesic_field(scene, wp, clearance=radius).dist for wp in waypoints)


def preferred_velocity(scene: Scene, human: HumanAgent, dt: float,
                       params: CrowdParams = DEFAULT_PARAMS, position=None):
    """Velocity along the geodesic towards the current waypoint, capped to avoid overshoot."""
    if human.phase != WALKING:
        return np.zeros(2)
    pos = human.position if position is None else position
    wp = human.current_waypoint
    ox, oy = wp[0] - pos[0], wp[1] - pos[1]
    dist = math.hypot(ox, oy)
    if dist < 1e-12:
        return np.zeros(2)
    if dist <= params.lookahead + scene.cell_size:
        dx, dy = ox / dist, oy / dist
    else:
        fields = human.fields or waypoint_fields(scene, human.waypoints, human.radius)
        dx, dy = kernels.descent_direction(fields[human.target], scene.cell_size, float(pos[0]),
                                           float(pos[1]), params.lookahead, 16)
        if dx == 0.0 and dy == 0.0:
            dx, dy = ox / dist, oy / dist
    speed = min(human.pref_speed, dist / dt)
    return np.array([dx * speed, dy * speed])


def step_crowd(state: CrowdState, scene: Scene, robot=None, dt: float = 0.25,
               params: CrowdParams = DEFAULT_PARAMS) -> CrowdState:
    """Advance the crowd one tick.

    ``robot`` is ``(position, velocity, radius)`` or None.  Humans avoid it
    with full responsibility and never commit a move that would overlap it,
    a wall, or another human.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    humans = state.humans
    n = len(humans)
    if n == 0:
        return replace(state, tick=state.tick + 1)
    if robot is None:
        robot_k = (0.0, 0.0, 0.0, 0.0, 0.0)
        robot_c = (0.0, 0.0, 0.0)
    else:
        (rx, ry), (rvx, rvy), rr = robot[0], robot[1], robot[2]
        robot_k = (float(rx), float(ry), float(rvx), float(rvy), float(rr))
        robot_c = (float(rx), float(ry), float(rr))

    pos = np.array([h.position for h in humans], dtype=np.float64)
    vel = np.array([h.velocity for h in humans], dtype=np.float64)
    radii = np.array([h.radius for h in humans])
    speeds = np.array([h.pref_speed for h in humans])
    walking = np.array([h.phase == WALKING for h in humans], dtype=np.uint8)
    h_dt = dt / params.substeps
    for _ in range(params.substeps):
        pref = np.zeros((n, 2))
        for i, h in enumerate(humans):
            if walking[i]:
                pref[i] = preferred_velocity(scene, h, h_dt, params, position=pos[i])
        new_vel = kernels.crowd_velocities(
            scene.obstacle_index, scene.cell_size, pos, vel, radii, pref, speeds, walking, robot_k,
            params.time_horizon, params.obstacle_time_horizon, 1.0 / h_dt,
            params.obstacle_reach, params.n_sectors, params.neighbour_reach)
        proposed = pos + new_vel * h_dt
        committed = kernels.commit_positions(scene.occupied, scene.cell_size, pos, proposed,
                                             radii, robot_c)
        vel = (committed - pos) / h_dt
        pos = committed

    out = []
    lo, hi = params.idle_ticks
    rng = None
    for i, h in enumerate(humans):
        phase, target, idle = h.phase, h.target, h.idle_remaining
        v = vel[i].copy()
        if phase == IDLE:
            idle -= 1
            if idle <= 0:
                phase, idle, target = WALKING, 0, (target + 1) % len(h.waypoints)
            v[:] = 0.0
        else:
            wp = h.waypoints[target]
            if math.hypot(wp[0] - pos[i, 0], wp[1] - pos[i, 1]) <= params.waypoint_tolerance:
                if rng is None:
                    rng = np.random.default_rng([state.seed, state.tick])
                if rng.random() < params.idle_probability:
                    phase, idle = IDLE, int(rng.integers(lo, hi + 1))
                    v[:] = 0.0
                else:
                    target = (target + 1) % len(h.waypoints)
        out.append(HumanAgent(h.id, pos[i].copy(), v, h.radius, h.pref_speed, h.waypoints,
                              target, phase, idle, h.fields))
    return CrowdState(humans=tuple(out), tick=state.tick + 1, seed=state.seed)


def assign_waypoints(scene: Scene, human: HumanAgent, rng: np.random.Generator,
                     params: CrowdParams = DEFAULT_PARAMS, max_draws: int = 200):
    """2-5 waypoints reachable from the human, pairwise at least ``waypoint_gap`` apart.

    The Euclidean gap is enforced, which bounds the geodesic gap from below.
    """
    try:
        spawn_field = geodesic_field(scene, human.position, clearance=human.radius)
    except ValueError as exc:
        raise PlacementError(f"human {human.id} spawn is not traversable") from exc
    reachable = np.isfinite(spawn_field.dist)
    lo, hi = params.waypoint_count
    k = int(rng.integers(lo, hi + 1))
    wps = []
    for _ in range(max_draws):
        if len(wps) == k:
            break
        p = sample_free_position(scene, rng, human.radius, mask=reachable)
        if all(math.hypot(*(p - q)) >= params.waypoint_gap for q in wps):
            wps.append(p)
    if len(wps) < lo:
        raise PlacementError(f"cannot place {lo} waypoints {params.waypoint_gap} m apart")
    return tuple(wps)


def spawn_crowd(scene: Scene, rng: np.random.Generator, count: int, robot_position=None,
                robot_radius: float = 0.25, params: CrowdParams = DEFAULT_PARAMS,
                max_draws: int = 500) -> CrowdState:
    """Place ``count`` humans with clearance, mutual separation and waypoints."""
    humans = []
    clearance = params.radius + params.spawn_margin
    for hid in range(count):
        for _ in range(max_draws):
            p = sample_free_position(scene, rng, clearance)
            if robot_position is not None and (
                    math.hypot(*(p - robot_position))
                    < params.radius + robot_radius + params.spawn_robot_gap):
                continue
            if any(math.hypot(*(p - h.position)) < 2 * params.radius + params.spawn_margin
                   for h in humans):
                continue
            break
        else:
            raise PlacementError(f"cannot place human {hid}")
        lo, hi = params.speed_range
        speed = float(rng.uniform(lo, hi)) * params.v_robot
        h = HumanAgent(id=hid, position=p, velocity=np.zeros(2), radius=params.radius,
                       pref_speed=speed, waypoints=())
        wps = assign_waypoints(scene, h, rng, params)
        h = replace(h, waypoints=wps, fields=waypoint_fields(scene, wps, h.radius))
        humans.append(h)
    return CrowdState(humans=tuple(humans), tick=0, seed=int(rng.integers(2**63)))


def forecast(state: CrowdState, scene: Scene, robot_position, robot_radius: float, dt: float,
             horizon: int, params: CrowdParams = DEFAULT_PARAMS) -> np.ndarray:
    """Positions of every human for the next ``horizon`` ticks, robot held still.

    Returns an ``(n, horizon, 2)`` array.
    """
    out = np.zeros((state.n, horizon, 2))
    if state.n == 0:
        return out
    robot = (robot_position, (0.0, 0.0), robot_radius)
    s = state
    for k in range(horizon):
        s = step_crowd(s, scene, robot, dt, params)
        out[:, k] = s.positions()
    return out
