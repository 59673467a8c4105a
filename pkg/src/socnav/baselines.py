"""Scripted comparison policies.  They read the simulator state directly."""

from __future__ import annotations

import math

import numpy as np

from .metrics import SUCCESS_RADIUS
from .policy import FORWARD, STOP, TURN_LEFT, TURN_RIGHT
from .sensing import wrap_angle
from .targets import risk_score

N_HEADINGS = 12


class StopOnly:
    name = "stop_only"

    def begin(self, env):
        pass

    def act(self, obs, env):
        return STOP


class GreedyGeodesic:
    """Head for the neighbouring pose with the lowest body-clearance geodesic distance.

    Every reachable heading (multiples of the turn angle) is scored by the
    field value one forward step away.  Already facing the best one: go
    forward; otherwise turn the short way round.  Humans are ignored.
    """

    name = "greedy_geodesic"

    def __init__(self, stop_radius: float = SUCCESS_RADIUS):
        self.stop_radius = stop_radius

    def begin(self, env):
        pass

    def _goal_close(self, env):
        x, y, _ = env.pose
        return math.hypot(env.goal[0] - x, env.goal[1] - y) < self.stop_radius

    def ranked_headings(self, env):
        """``[(field value, k)]`` sorted best first, k = turns counter-clockwise."""
        x, y, h = env.pose
        n = int(round(2 * math.pi / env.config.turn_angle))
        out = []
        for k in range(n):
            hk = h + k * env.config.turn_angle
            nxt = env.try_forward((x, y, hk))
            if nxt is None:
                continue
            v = env.body_field.at(nxt)
            if math.isfinite(v):
                # prefer fewer turns among equal values
                out.append((v, min(k, n - k), k))
        out.sort()
        return [(v, k) for v, _, k in out], n

    def _turn_towards(self, k, n):
        return TURN_LEFT if k <= n - k else TURN_RIGHT

    def act(self, obs, env):
        if self._goal_close(env):
            return STOP
        ranked, n = self.ranked_headings(env)
        if not ranked:
            return TURN_LEFT
        _, k = ranked[0]
        return FORWARD if k == 0 else self._turn_towards(k, n)


class RiskAwareGreedy(GreedyGeodesic):
    """Greedy geodesic with a local risk veto.

    A forward step is vetoed when it would end where some human's risk score
    exceeds ``threshold`` while bringing the robot closer to that human.  The
    robot takes the best heading whose step is not vetoed, turning in place
    towards it; with every heading vetoed it turns away from the nearest
    human.
    """

    name = "risk_aware_greedy"

    def __init__(self, threshold: float = 0.75, stop_radius: float = SUCCESS_RADIUS):
        super().__init__(stop_radius)
        self.threshold = threshold

    def vetoed(self, env, pose_next) -> bool:
        x, y = env.pose[0], env.pose[1]
        for hm in env.crowd.humans:
            hx, hy = hm.position
            d_next = math.hypot(hx - pose_next[0], hy - pose_next[1])
            if (risk_score(d_next, env.config.risk) > self.threshold
                    and d_next < math.hypot(hx - x, hy - y)):
                return True
        return False

    def act(self, obs, env):
        if self._goal_close(env):
            return STOP
        ranked, n = self.ranked_headings(env)
        if not ranked:
            return TURN_LEFT
        x, y, h = env.pose
        for _, k in ranked:
            nxt = env.try_forward((x, y, h + k * env.config.turn_angle))
            if not self.vetoed(env, nxt):
                return FORWARD if k == 0 else self._turn_towards(k, n)
        return self._turn_away(env)

    def _turn_away(self, env):
        x, y, h = env.pose
        pos = np.array([hm.position for hm in env.crowd.humans])
        i = int(np.argmin(np.hypot(pos[:, 0] - x, pos[:, 1] - y)))
        bearing = wrap_angle(math.atan2(pos[i, 1] - y, pos[i, 0] - x) - h)
        # human on the left: turn right, and vice versa
        return TURN_RIGHT if bearing >= 0 else TURN_LEFT


BASELINES = {"stop_only": StopOnly, "greedy_geodesic": GreedyGeodesic,
             "risk_aware_greedy": RiskAwareGreedy}


def baseline_policies():
    return {name: cls() for name, cls in BASELINES.items()}
