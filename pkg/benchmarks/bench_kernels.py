"""Time the compiled kernels against the pure-Python reference on the same inputs.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import math
import time

import numpy as np

from socnav.crowd import spawn_crowd
from socnav.kernels import available_backends, get_backend
from socnav.scene import generate_scene


def bench(fn, repeat):
    fn()  # warm up
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(scene, crowd):
    occ = scene.occupied
    cs = scene.cell_size
    free = scene.free
    rows, cols = np.nonzero(free)
    gr, gc = int(rows[len(rows) // 2]), int(cols[len(cols) // 2])
    pos = crowd.positions()
    n = len(pos)
    vel = np.zeros((n, 2))
    radii = np.full(n, 0.3)
    pref = np.tile([0.8, 0.0], (n, 1))
    speeds = np.full(n, 1.0)
    walking = np.ones(n, dtype=np.uint8)
    robot = (pos[0, 0] + 1.0, pos[0, 1], 0.0, 0.0, 0.25)
    x, y = float(pos[0, 0]), float(pos[0, 1])
    angles = np.linspace(-math.pi / 4, math.pi / 4, 64)
    discs = np.column_stack([pos, radii])
    index = scene.obstacle_index
    field = get_backend("python").geodesic(free, gr, gc, cs)
    field = np.where(np.isfinite(field), field, 1e9)

    def make(k):
        return {
            "geodesic": lambda: k.geodesic(free, gr, gc, cs),
            "raycast (64 rays)": lambda: k.raycast(occ, cs, x, y, angles, 5.0, discs),
            "crowd_velocities": lambda: k.crowd_velocities(
                index, cs, pos, vel, radii, pref, speeds, walking, robot, 2.0, 1.0, 8.0, 1.7,
                16, 6.0),
            "commit_positions": lambda: k.commit_positions(occ, cs, pos, pos + 0.05, radii,
                                                           robot[:2] + (0.25,)),
            "descent_direction": lambda: k.descent_direction(field, cs, x, y, 0.3, 16),
            "disc_is_free": lambda: k.disc_is_free(occ, cs, x, y, 0.3),
        }
    return make


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    scene = generate_scene(args.seed, "large")
    crowd = spawn_crowd(scene, np.random.default_rng(args.seed), 6)
    make = cases(scene, crowd)
    backends = available_backends()
    results = {b: {name: bench(fn, args.repeat) for name, fn in make(get_backend(b)).items()}
               for b in backends}
    names = list(results[backends[0]])
    print(f"scene {scene.grid.shape[1]}x{scene.grid.shape[0]} cells, {crowd.n} humans")
    header = f"{'kernel':<20}" + "".join(f"{b:>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for name in names:
        line = f"{name:<20}" + "".join(f"{results[b][name] * 1e6:>12.1f}us" for b in backends)
        if len(backends) == 2:
            line += f"{results[backends[1]][name] / results[backends[0]][name]:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
