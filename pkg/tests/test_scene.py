import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import ndimage, stats

from socnav.errors import PlacementError, SceneGenerationError
from socnav.scene import (CELL_SIZE, SIZE_CLASSES, Scene, corridor_scene, generate_scene,
                          geodesic_field, human_count_for_area, load_scene,
                          sample_free_position, save_scene)

from .conftest import open_grid
from .oracles import floyd_warshall_grid


@pytest.mark.parametrize("size", ["small", "medium", "large"])
@pytest.mark.parametrize("seed", [0, 7, 123456789])
def test_generate_scene_area_and_invariants(size, seed):
    s = generate_scene(seed, size)
    lo, hi = SIZE_CLASSES[size]
    assert lo <= s.free_area < hi
    assert s.free_area == np.count_nonzero(~s.grid) * CELL_SIZE ** 2
    g = s.grid
    assert g[0].all() and g[-1].all() and g[:, 0].all() and g[:, -1].all()
    for r0, c0, r1, c1 in s.rooms:
        assert 0 <= r0 < r1 <= g.shape[0] and 0 <= c0 < c1 <= g.shape[1]
        assert not g[r0:r1, c0:c1].any()


def test_generate_scene_deterministic():
    a, b = generate_scene(7, "small"), generate_scene(7, "small")
    assert np.array_equal(a.grid, b.grid)
    c = generate_scene(8, "small")
    assert c.grid.shape != a.grid.shape or not np.array_equal(c.grid, a.grid)


def test_large_scene_fully_connected_by_flood_fill():
    s = generate_scene(7, "large")
    free = ~s.grid
    seed = tuple(np.argwhere(free)[0])
    filled = np.zeros_like(free)
    filled[seed] = True
    # independent flood fill by repeated 4-neighbour dilation
    while True:
        grown = ndimage.binary_dilation(filled, structure=ndimage.generate_binary_structure(2, 1))
        grown &= free
        if (grown == filled).all():
            break
        filled = grown
    assert (filled == free).all()


def test_generation_failure_is_explicit(monkeypatch):
    import socnav.scene as sc
    # no multiple of the cell area falls inside this band
    monkeypatch.setitem(sc.SIZE_CLASSES, "tiny", (20.0001, 20.0002))
    monkeypatch.setattr(sc, "MAX_GENERATION_ATTEMPTS", 3)
    with pytest.raises(SceneGenerationError):
        generate_scene(0, "tiny")
    with pytest.raises(ValueError):
        generate_scene(0, "huge")


def test_human_count_examples():
    assert human_count_for_area(60.0) == 4
    assert human_count_for_area(120.0) == 6
    assert human_count_for_area(40.0) == 4 and human_count_for_area(80.0) == 4
    a = human_count_for_area(30.0, np.random.default_rng(5))
    b = human_count_for_area(30.0, np.random.default_rng(5))
    assert a == b and a in (0, 1, 2)
    with pytest.raises(ValueError):
        human_count_for_area(0.0)


def test_human_count_banding_10k():
    rng = np.random.default_rng(0)
    areas = rng.uniform(0.01, 200.0, 10_000)
    for a in areas:
        n = human_count_for_area(a, rng)
        assert n <= 6
        if a < 40:
            assert n in (0, 1, 2)
        elif a <= 80:
            assert n == 4
        else:
            assert n == 6


def test_geodesic_examples():
    s = Scene(np.zeros((10, 10), dtype=bool), cell_size=0.1)
    f = geodesic_field(s, s.cell_center(5, 5))
    assert f.dist[5, 6] == pytest.approx(0.1, abs=0)
    assert f.dist[5, 5] == 0.0
    c = corridor_scene(length=3.0, width=1.0)
    row = c.grid.shape[0] // 2
    f = geodesic_field(c, c.cell_center(row, 2))
    # 60 cells apart along the axis: endpoint distance 3.0 m minus one cell
    assert f.dist[row, 2 + 59] == pytest.approx(59 * 0.05, abs=1e-12)
    ends = f.dist[row, 2 + 59] + 0.05
    assert ends == pytest.approx(3.0, abs=1e-12)


def test_geodesic_rejects_occupied_goal():
    s = corridor_scene()
    with pytest.raises(ValueError):
        geodesic_field(s, (0.01, 0.01))


@pytest.mark.parametrize("seed", range(5))
def test_geodesic_matches_floyd_warshall(seed):
    rng = np.random.default_rng(seed)
    g = rng.random((20, 20)) < 0.3
    s = Scene(g, cell_size=0.05)
    free = ~g
    fw = floyd_warshall_grid(free, 0.05)
    goal = tuple(np.argwhere(free)[rng.integers(free.sum())])
    f = geodesic_field(s, s.cell_center(*goal))
    expected = fw[goal[0] * 20 + goal[1]].reshape(20, 20)
    expected[g] = np.inf
    fin = np.isfinite(expected)
    assert np.array_equal(np.isfinite(f.dist), fin)
    assert np.max(np.abs(f.dist[fin] - expected[fin])) < 1e-12


def test_distance_field_invariants():
    s = generate_scene(3, "small")
    goal = sample_free_position(s, np.random.default_rng(0))
    f = geodesic_field(s, goal)
    d = f.dist
    assert d[f.origin] == 0.0
    assert np.all(np.isinf(d[s.grid]))
    cs = s.cell_size
    rows, cols = d.shape
    fin = np.argwhere(np.isfinite(d))
    for r, c in fin[:: max(len(fin) // 400, 1)]:
        if (r, c) == f.origin:
            continue
        best = math.inf
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if (dr or dc) and 0 <= r + dr < rows and 0 <= c + dc < cols:
                    if dr and dc and (s.grid[r, c + dc] or s.grid[r + dr, c]):
                        continue
                    step = cs * (math.sqrt(2) if dr and dc else 1)
                    best = min(best, d[r + dr, c + dc] + step)
                    # adjacent consistency
                    if np.isfinite(d[r + dr, c + dc]) and not (dr and dc):
                        assert abs(d[r, c] - d[r + dr, c + dc]) <= cs * math.sqrt(2) + 1e-12
        assert d[r, c] == pytest.approx(best, abs=1e-12)


@given(st.integers(0, 1000))
def test_geodesic_triangle_inequality(seed):
    s = generate_scene(seed % 5, "small")
    rng = np.random.default_rng(seed)
    a, b, c = (sample_free_position(s, rng) for _ in range(3))
    fa, fc = geodesic_field(s, a), geodesic_field(s, c)
    assert fa.at(b) <= fa.at(c) + fc.at(b) + 1e-9


def test_sample_free_position_clearance_and_errors():
    s = generate_scene(2, "medium")
    rng = np.random.default_rng(0)
    for _ in range(200):
        p = sample_free_position(s, rng, 0.3)
        assert s.disc_is_free(p, 0.3)
    assert s.is_free(sample_free_position(s, rng, 0.0))
    with pytest.raises(PlacementError):
        sample_free_position(s, rng, 100.0)
    with pytest.raises(ValueError):
        sample_free_position(s, rng, -1.0)


def test_sample_free_position_uniform_multinomial():
    g = open_grid(8, 8)  # 6x6 free block, symmetric
    s = Scene(g, cell_size=0.1)
    rng = np.random.default_rng(42)
    counts = {}
    n = 1000
    for _ in range(n):
        cell = s.cell_of(sample_free_position(s, rng))
        counts[cell] = counts.get(cell, 0) + 1
    k = int((~g).sum())
    assert len(counts) == k
    p = 1.0 / k
    sigma = math.sqrt(n * p * (1 - p))
    assert all(abs(c - n * p) <= 4 * sigma for c in counts.values())
    chi2 = sum((c - n * p) ** 2 / (n * p) for c in counts.values())
    assert stats.chi2.sf(chi2, k - 1) > 1e-4


def test_scene_save_load_roundtrip(tmp_path):
    s = generate_scene(11, "medium")
    p = tmp_path / "a.scene"
    save_scene(s, p)
    t = load_scene(p)
    assert np.array_equal(s.grid, t.grid)
    assert (t.seed, t.cell_size, t.size_class, t.rooms) == (s.seed, s.cell_size, s.size_class,
                                                            s.rooms)


def test_clearance_mask_matches_disc_test():
    s = generate_scene(4, "small")
    m = s.clearance_mask(0.3)
    rng = np.random.default_rng(1)
    cells = np.argwhere(np.ones_like(m))
    for r, c in cells[rng.choice(len(cells), 400, replace=False)]:
        assert m[r, c] == s.disc_is_free(s.cell_center(r, c), 0.3)
