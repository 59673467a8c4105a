"""Procedural indoor worlds, occupancy queries and geodesic distance fields."""

from __future__ import annotations

import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import ndimage, signal

from . import kernels
from .errors import PlacementError, SceneGenerationError

CELL_SIZE = 0.05
WALL_CELLS = 2
DOOR_WIDTH = 1.0
MIN_ROOM_SIDE = 2.0
MAX_GENERATION_ATTEMPTS = 32
M_MAX = 6

SIZE_CLASSES = {
    "small": (20.0, 40.0),
    "medium": (40.0, 80.0),
    "large": (80.0, 160.0),
}

SCENE_FORMAT_VERSION = 1
FIELD_CACHE_SIZE = 128  # distance fields kept per scene


@dataclass(frozen=True, eq=False)
class Scene:
    """Occupancy grid with metric extent.

    ``grid[row, col]`` is True for occupied cells.  Cell ``(row, col)`` covers
    ``[col * cell_size, (col + 1) * cell_size) x [row * cell_size, ...)`` in
    world metres.  ``rooms`` holds ``(row0, col0, row1, col1)`` half-open cell
    rectangles.
    """

    grid: np.ndarray
    cell_size: float = CELL_SIZE
    rooms: tuple = ()
    seed: int = 0
    size_class: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @cached_property
    def occupied(self) -> np.ndarray:
        occ = np.ascontiguousarray(self.grid, dtype=np.uint8)
        occ.setflags(write=False)
        return occ

    @cached_property
    def free(self) -> np.ndarray:
        free = np.ascontiguousarray(~self.grid.astype(bool), dtype=np.uint8)
        free.setflags(write=False)
        return free

    @property
    def shape(self):
        return self.grid.shape

    @cached_property
    def free_area(self) -> float:
        return float(np.count_nonzero(self.free)) * self.cell_size**2

    @property
    def extent(self):
        rows, cols = self.grid.shape
        return cols * self.cell_size, rows * self.cell_size

    def cell_of(self, pos):
        x, y = pos
        return int(math.floor(y / self.cell_size)), int(math.floor(x / self.cell_size))

    def cell_center(self, row, col):
        return np.array([(col + 0.5) * self.cell_size, (row + 0.5) * self.cell_size])

    def in_bounds(self, row, col):
        rows, cols = self.grid.shape
        return 0 <= row < rows and 0 <= col < cols

    def is_free(self, pos) -> bool:
        row, col = self.cell_of(pos)
        return self.in_bounds(row, col) and not self.grid[row, col]

    def disc_is_free(self, pos, radius) -> bool:
        return kernels.disc_is_free(self.occupied, self.cell_size, float(pos[0]), float(pos[1]),
                                    float(radius))

    @cached_property
    def obstacle_index(self):
        """Binned wall-surface cells for local obstacle queries (1 m bins)."""
        return kernels.obstacle_index(self.occupied, self.cell_size,
                                      max(int(round(1.0 / self.cell_size)), 1))

    def clearance_mask(self, clearance: float) -> np.ndarray:
        """Cells whose centre disc of radius ``clearance`` touches no occupied cell."""
        key = ("clear", round(float(clearance), 9))
        mask = self._cache.get(key)
        if mask is None:
            mask = _clearance_mask(self.grid, self.cell_size, clearance)
            mask.setflags(write=False)
            self._cache[key] = mask
        return mask


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Geodesic distance in metres from ``origin`` to every cell."""

    origin: tuple
    dist: np.ndarray
    cell_size: float

    def at(self, pos) -> float:
        col = int(math.floor(pos[0] / self.cell_size))
        row = int(math.floor(pos[1] / self.cell_size))
        rows, cols = self.dist.shape
        if 0 <= row < rows and 0 <= col < cols:
            return float(self.dist[row, col])
        return math.inf


def _footprint(clearance, cell_size):
    reach = int(math.ceil(clearance / cell_size)) + 1
    offs = np.arange(-reach, reach + 1)
    di, dj = np.meshgrid(offs, offs, indexing="ij")
    gap_i = np.maximum(np.abs(di) - 0.5, 0.0)
    gap_j = np.maximum(np.abs(dj) - 0.5, 0.0)
    return (gap_i**2 + gap_j**2) * cell_size**2 < clearance**2


def _clearance_mask(grid, cell_size, clearance):
    occ = np.asarray(grid, dtype=bool)
    if clearance <= 0.0:
        return ~occ
    if clearance > min(occ.shape) * cell_size / 2:
        # a disc that wide cannot fit anywhere inside the bounded grid
        return np.zeros_like(occ)
    fp = _footprint(clearance, cell_size)
    pad = fp.shape[0] // 2
    padded = np.pad(occ, pad, constant_values=True).astype(np.float64)
    hits = signal.fftconvolve(padded, fp.astype(np.float64), mode="same")
    hits = hits[pad:-pad, pad:-pad]
    return (hits < 0.5) & ~occ


def connected_components(free_mask):
    """4-connected labelling, equivalent to the corner-cut-free 8-connected graph."""
    labels, n = ndimage.label(free_mask, structure=[[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    return labels, n


# ---------------------------------------------------------------------------
# generation


def _carve_layout(rng, rows_in, cols_in, cell_size, target_room_area):
    """Recursive room split with one door per dividing wall."""
    wall = WALL_CELLS
    rows, cols = rows_in + 2 * wall, cols_in + 2 * wall
    grid = np.ones((rows, cols), dtype=bool)
    grid[wall:wall + rows_in, wall:wall + cols_in] = False
    min_side = int(round(MIN_ROOM_SIDE / cell_size))
    door = int(round(DOOR_WIDTH / cell_size))
    doors = []  # (axis, line_start, line_end, span_start, span_end); axis 0: horizontal wall
    rooms = []

    def conflicts(axis, pos, r0, c0, r1, c1):
        # a new wall starting/ending on an existing door would narrow it
        margin = wall + 2
        for d_axis, l0, l1, s0, s1 in doors:
            if d_axis == axis:
                continue
            if axis == 1:  # vertical wall at column pos spanning rows r0..r1
                if not (l1 >= r0 - wall and l0 <= r1 + wall):
                    continue
                if pos + wall > s0 - margin and pos < s1 + margin:
                    return True
            else:
                if not (l1 >= c0 - wall and l0 <= c1 + wall):
                    continue
                if pos + wall > s0 - margin and pos < s1 + margin:
                    return True
        return False

    def split(r0, c0, r1, c1):
        h, w = r1 - r0, c1 - c0
        area = h * w * cell_size**2
        can_h = h >= 2 * min_side + wall
        can_v = w >= 2 * min_side + wall
        if not (can_h or can_v) or (area < target_room_area * rng.uniform(1.0, 1.8)):
            rooms.append((r0, c0, r1, c1))
            return
        if can_h and can_v:
            axis = 0 if (h > w * 1.15 or (w <= h * 1.15 and rng.random() < 0.5)) else 1
        else:
            axis = 0 if can_h else 1
        lo_lim, hi_lim = (r0, r1) if axis == 0 else (c0, c1)
        for _ in range(24):
            pos = int(rng.integers(lo_lim + min_side, hi_lim - min_side - wall + 1))
            if not conflicts(axis, pos, r0, c0, r1, c1):
                break
        else:
            rooms.append((r0, c0, r1, c1))
            return
        span = (c1 - c0) if axis == 0 else (r1 - r0)
        dw = min(door, span - 2)
        d0 = int(rng.integers(0, span - dw + 1))
        if axis == 0:
            grid[pos:pos + wall, c0:c1] = True
            grid[pos:pos + wall, c0 + d0:c0 + d0 + dw] = False
            doors.append((0, pos, pos + wall, c0 + d0, c0 + d0 + dw))
            split(r0, c0, pos, c1)
            split(pos + wall, c0, r1, c1)
        else:
            grid[r0:r1, pos:pos + wall] = True
            grid[r0 + d0:r0 + d0 + dw, pos:pos + wall] = False
            doors.append((1, pos, pos + wall, r0 + d0, r0 + d0 + dw))
            split(r0, c0, r1, pos)
            split(r0, pos + wall, r1, c1)

    split(wall, wall, wall + rows_in, wall + cols_in)
    return grid, rooms


def generate_scene(seed: int, size_class: str, cell_size: float = CELL_SIZE) -> Scene:
    """Room-and-corridor layout whose free area lies in the class range.

    Deterministic in ``(seed, size_class)``; sub-seeds are tried until the
    area and connectivity constraints hold.
    """
    if size_class not in SIZE_CLASSES:
        raise ValueError(f"unknown size class {size_class!r}")
    lo, hi = SIZE_CLASSES[size_class]
    for attempt in range(MAX_GENERATION_ATTEMPTS):
        rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, attempt])
        margin = 0.08 * (hi - lo)
        target = rng.uniform(lo + margin, hi - margin)
        interior = target * 1.04
        aspect = rng.uniform(1.0, 1.8)
        width_m = math.sqrt(interior * aspect)
        height_m = interior / width_m
        if rng.random() < 0.5:
            width_m, height_m = height_m, width_m
        cols_in = int(round(width_m / cell_size))
        rows_in = int(round(height_m / cell_size))
        grid, rooms = _carve_layout(rng, rows_in, cols_in, cell_size,
                                    target_room_area=rng.uniform(12.0, 28.0))
        scene = Scene(grid=grid, cell_size=cell_size, rooms=tuple(rooms),
                      seed=int(seed), size_class=size_class)
        if not lo <= scene.free_area < hi:
            continue
        if connected_components(scene.free)[1] != 1:
            continue
        grid.setflags(write=False)
        return scene
    raise SceneGenerationError(
        f"no valid {size_class} scene for seed {seed} after {MAX_GENERATION_ATTEMPTS} attempts")


def corridor_scene(length: float = 8.0, width: float = 2.0, seed: int = 0,
                   cell_size: float = CELL_SIZE) -> Scene:
    """Single straight corridor, the no-human curriculum world."""
    wall = WALL_CELLS
    cols_in = int(round(length / cell_size))
    rows_in = int(round(width / cell_size))
    grid = np.ones((rows_in + 2 * wall, cols_in + 2 * wall), dtype=bool)
    grid[wall:wall + rows_in, wall:wall + cols_in] = False
    grid.setflags(write=False)
    return Scene(grid=grid, cell_size=cell_size,
                 rooms=((wall, wall, wall + rows_in, wall + cols_in),),
                 seed=int(seed), size_class="corridor")


def human_count_for_area(free_area: float, rng: np.random.Generator | None = None) -> int:
    """Human count banded by free floor area (0-2 / 4 / 6)."""
    if not free_area > 0:
        raise ValueError(f"free_area must be positive, got {free_area}")
    if free_area < 40.0:
        if rng is None:
            raise ValueError("a generator is required for the small-area band")
        return int(rng.integers(0, 3))
    if free_area <= 80.0:
        return 4
    return 6


def geodesic_field(scene: Scene, goal, clearance: float = 0.0) -> DistanceField:
    """Exact shortest-path distances on the 8-connected free-cell graph.

    With ``clearance > 0`` only cells whose centre disc of that radius is free
    take part, which gives the field a body of that radius can follow.
    """
    row, col = scene.cell_of(goal)
    free = scene.free if clearance <= 0.0 else scene.clearance_mask(clearance)
    if not scene.in_bounds(row, col) or not free[row, col]:
        raise ValueError(f"goal {tuple(goal)} is not in a free cell")
    key = (row, col, round(float(clearance), 9))
    fields = scene._cache.setdefault("fields", OrderedDict())
    cached = fields.get(key)
    if cached is not None:
        fields.move_to_end(key)
        return cached
    dist = kernels.geodesic(free, row, col, scene.cell_size)
    dist.setflags(write=False)
    out = DistanceField(origin=(row, col), dist=dist, cell_size=scene.cell_size)
    fields[key] = out
    if len(fields) > FIELD_CACHE_SIZE:
        fields.popitem(last=False)
    return out


def sample_free_position(scene: Scene, rng: np.random.Generator, min_clearance: float = 0.0,
                         mask: np.ndarray | None = None) -> np.ndarray:
    """Centre of a uniformly drawn cell whose ``min_clearance`` disc is free.

    ``mask`` further restricts the candidate cells.
    """
    if min_clearance < 0:
        raise ValueError("min_clearance must be non-negative")
    ok = scene.clearance_mask(min_clearance)
    if mask is not None:
        ok = ok & mask
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        raise PlacementError(f"no free cell with clearance {min_clearance} m")
    pick = int(idx[rng.integers(0, idx.size)])
    row, col = divmod(pick, scene.grid.shape[1])
    return scene.cell_center(row, col)


# ---------------------------------------------------------------------------
# serialisation


def save_scene(scene: Scene, path) -> None:
    rows, cols = scene.grid.shape
    header = {
        "version": SCENE_FORMAT_VERSION,
        "seed": scene.seed,
        "cell_size": scene.cell_size,
        "width": cols,
        "height": rows,
        "size_class": scene.size_class,
        "rooms": [list(map(int, r)) for r in scene.rooms],
    }
    lines = ["# socnav-scene", json.dumps(header, sort_keys=True)]
    chars = np.where(scene.grid, "#", ".")
    lines.extend("".join(row) for row in chars)
    Path(path).write_text("\n".join(lines) + "\n")


def load_scene(path) -> Scene:
    text = Path(path).read_text().splitlines()
    if not text or text[0] != "# socnav-scene":
        raise ValueError(f"{path}: not a scene file")
    header = json.loads(text[1])
    if header.get("version") != SCENE_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported scene version {header.get('version')}")
    rows = text[2:2 + header["height"]]
    if len(rows) != header["height"] or any(len(r) != header["width"] for r in rows):
        raise ValueError(f"{path}: grid does not match header dimensions")
    grid = np.array([[ch == "#" for ch in r] for r in rows], dtype=bool)
    grid.setflags(write=False)
    return Scene(grid=grid, cell_size=float(header["cell_size"]),
                 rooms=tuple(tuple(r) for r in header["rooms"]),
                 seed=int(header["seed"]), size_class=header.get("size_class", ""))
