import numpy as np
import pytest

from nspregen.errors import AllSolid, OutOfRange, PlacementExhausted
from nspregen.geometry import (
    Axis,
    BinaryMask,
    ObstacleSet,
    Rect,
    Tier,
    classify_geometry_difficulty,
    compute_sdf,
    rasterize_mask,
    sample_obstacles,
)


def brute_force_mask(obs, grid_dims):
    h, w = grid_dims
    lx, ly = obs.domain_size
    out = np.ones((h, w), dtype=bool)
    for j in range(h):
        for i in range(w):
            cx, cy = (i + 0.5) * lx / w, (j + 0.5) * ly / h
            if any(r.contains(cx, cy) for r in obs.obstacles):
                out[j, i] = False
    return out


def brute_force_interface_distance(mask: BinaryMask) -> np.ndarray:
    """Exact distance from each cell center to the nearest opposite-phase
    cell rectangle (= the rasterized interface for points outside it)."""
    fluid = mask.grid
    h, w = fluid.shape
    dx, dy = mask.cell_size
    cx = (np.arange(w) + 0.5) * dx
    cy = (np.arange(h) + 0.5) * dy
    out = np.empty((h, w))
    for j in range(h):
        for i in range(w):
            targets = ~fluid if fluid[j, i] else fluid
            jj, ii = np.nonzero(targets)
            if jj.size == 0:
                out[j, i] = np.inf
                continue
            # point-to-rectangle distance for each target cell
            ddx = np.maximum(np.maximum(ii * dx - cx[i], cx[i] - (ii + 1) * dx), 0.0)
            ddy = np.maximum(np.maximum(jj * dy - cy[j], cy[j] - (jj + 1) * dy), 0.0)
            out[j, i] = np.sqrt(ddx**2 + ddy**2).min()
    return out


class TestSampleObstacles:
    def test_zero_count_gives_empty_set(self):
        obs = sample_obstacles(0, (2, 2), (0.15, 0.3), 0.1, 0.05, seed=5)
        assert len(obs) == 0
        assert obs.domain_size == (2.0, 2.0)

    def test_ten_obstacles_disjoint_and_in_bounds(self):
        obs = sample_obstacles(10, (2, 2), (0.15, 0.30), 0.1, 0.05, seed=42)
        assert len(obs) == 10
        for r in obs.obstacles:
            assert r.x >= 0.1 and r.y >= 0.1
            assert r.x2 <= 1.9 and r.y2 <= 1.9
        for a in range(10):
            for b in range(a + 1, 10):
                assert obs.obstacles[a].separation_ok(obs.obstacles[b], 0.05)

    def test_oversized_rects_exhaust(self):
        with pytest.raises(PlacementExhausted):
            sample_obstacles(2, (2, 2), (1.5, 1.6), 0.1, 0.05, seed=3,
                             max_attempts=500)

    def test_deterministic(self):
        a = sample_obstacles(5, (2, 2), (0.15, 0.3), 0.1, 0.05, seed=77)
        b = sample_obstacles(5, (2, 2), (0.15, 0.3), 0.1, 0.05, seed=77)
        assert a == b

    def test_count_out_of_range(self):
        with pytest.raises(OutOfRange):
            sample_obstacles(11, (2, 2), (0.15, 0.3), 0.1, 0.05, seed=1)
        with pytest.raises(OutOfRange):
            sample_obstacles(-1, (2, 2), (0.15, 0.3), 0.1, 0.05, seed=1)

    def test_json_round_trip(self):
        obs = sample_obstacles(3, (2, 2), (0.15, 0.3), 0.1, 0.05, seed=9)
        assert ObstacleSet.from_json(obs.to_json()) == obs


class TestRasterize:
    def test_empty_set_all_fluid(self):
        mask = rasterize_mask(ObstacleSet((), 0, (2.0, 2.0)), (16, 16))
        assert mask.grid.all()
        assert mask.cell_size == (0.125, 0.125)

    def test_quadrant_rect_hand_enumerated(self):
        # upper-left quadrant of a 2x2 domain on a 4x4 grid: exactly the
        # four cells with centers x in {0.25, 0.75}, y in {1.25, 1.75}
        obs = ObstacleSet((Rect(0.0, 1.0, 1.0, 1.0),), 0, (2.0, 2.0))
        mask = rasterize_mask(obs, (8, 8))
        expected = brute_force_mask(obs, (8, 8))
        assert np.array_equal(mask.grid, expected)
        assert (~mask.grid).sum() == 16  # 4x4 block of blocked cells

    def test_centered_square_against_brute_force(self):
        obs = ObstacleSet((Rect(0.75, 0.75, 0.5, 0.5),), 0, (2.0, 2.0))
        mask = rasterize_mask(obs, (128, 128))
        assert np.array_equal(mask.grid, brute_force_mask(obs, (128, 128)))

    def test_random_sets_match_brute_force(self):
        for seed in range(5):
            obs = sample_obstacles(4, (2, 2), (0.2, 0.5), 0.1, 0.05, seed=seed)
            mask = rasterize_mask(obs, (24, 24))
            assert np.array_equal(mask.grid, brute_force_mask(obs, (24, 24)))

    def test_minimum_grid(self):
        with pytest.raises(OutOfRange):
            rasterize_mask(ObstacleSet((), 0, (2.0, 2.0)), (4, 4))


class TestSdf:
    def test_all_fluid_capped(self):
        mask = rasterize_mask(ObstacleSet((), 0, (2.0, 2.0)), (16, 16))
        sdf = compute_sdf(mask)
        cap = np.hypot(2.0, 2.0)
        assert np.all(sdf.grid == cap)

    def test_all_solid_rejected(self):
        mask = BinaryMask(np.zeros((8, 8), dtype=bool), (0.25, 0.25), (2.0, 2.0))
        with pytest.raises(AllSolid):
            compute_sdf(mask)

    def test_single_solid_cell(self):
        grid = np.ones((33, 33), dtype=bool)
        grid[16, 16] = False
        cell = 2.0 / 33
        mask = BinaryMask(grid, (cell, cell), (2.0, 2.0))
        sdf = compute_sdf(mask).grid
        assert sdf[16, 16] <= 0
        half_diag = 0.5 * cell * np.sqrt(2)
        for k in (1, 3, 7):
            exact = k * cell - 0.5 * cell  # center-to-edge along the axis
            assert abs(sdf[16, 16 + k] - exact) <= half_diag

    def test_signs_and_magnitudes_on_random_masks(self):
        for seed in range(10):
            obs = sample_obstacles(3, (2, 2), (0.2, 0.5), 0.1, 0.05, seed=seed)
            mask = rasterize_mask(obs, (24, 24))
            sdf = compute_sdf(mask).grid
            assert np.all((sdf > 0) == mask.grid)
            dist = brute_force_interface_distance(mask)
            half_diag = 0.5 * np.hypot(*mask.cell_size)
            assert np.all(np.abs(np.abs(sdf) - dist) <= half_diag + 1e-12)


class TestClassify:
    @pytest.mark.parametrize("count,tier", [
        (0, Tier.EASY), (1, Tier.MEDIUM), (2, Tier.HARD),
        (7, Tier.HARD), (10, Tier.HARD),
    ])
    def test_mapping(self, count, tier):
        d = classify_geometry_difficulty(count)
        assert d.level is tier
        assert d.axis is Axis.GEOMETRY

    def test_out_of_range(self):
        for bad in (-1, 11):
            with pytest.raises(OutOfRange):
                classify_geometry_difficulty(bad)

    def test_partition_is_total(self):
        levels = [classify_geometry_difficulty(c).level for c in range(11)]
        assert levels == [Tier.EASY] + [Tier.MEDIUM] + [Tier.HARD] * 9
