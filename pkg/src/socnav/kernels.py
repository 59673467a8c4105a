"""Kernel backend selection.

The compiled extension is used when it imports; set ``SOCNAV_KERNELS=python``
to force the pure-Python implementations (used by the test-suite to check
both backends agree).
"""

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

_FUNCS = (
    "geodesic",
    "disc_is_free",
    "raycast",
    "obstacle_index",
    "local_obstacles",
    "orca_velocity",
    "crowd_velocities",
    "commit_positions",
    "descent_direction",
)


def _load(name):
    if name == "python":
        return _pykernels
    if name == "compiled":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    out = ["python"]
    try:
        _load("compiled")
    except ImportError:
        pass
    else:
        out.insert(0, "compiled")
    return out


def get_backend(name):
    """Module implementing every kernel for backend ``name``."""
    return _load(name)


_requested = os.environ.get("SOCNAV_KERNELS", "auto").lower()
if _requested == "auto":
    try:
        _impl = _load("compiled")
        BACKEND = "compiled"
    except ImportError:
        log.warning("compiled kernels unavailable, using pure-Python fallback")
        _impl = _pykernels
        BACKEND = "python"
else:
    _impl = _load(_requested)
    BACKEND = _requested

geodesic = _impl.geodesic
disc_is_free = _impl.disc_is_free
raycast = _impl.raycast
obstacle_index = _impl.obstacle_index
local_obstacles = _impl.local_obstacles
orca_velocity = _impl.orca_velocity
crowd_velocities = _impl.crowd_velocities
commit_positions = _impl.commit_positions
descent_direction = _impl.descent_direction
