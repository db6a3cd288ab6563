import numpy as np
import pytest

from rhloco.terrain import (
    Heightmap, extract_edges, flat_map, make_stairs, nearest_obstacles,
    sentinel_obstacle,
)


class TestMakeStairs:
    def test_empty_spec_is_flat(self):
        hm = make_stairs([])
        assert np.all(hm.heights == 0.0)

    def test_single_step_heights(self):
        hm = make_stairs([(1.0, 0.16, 0.0)])
        assert hm.height_at(0.5, 0.0) == pytest.approx(0.0)
        assert hm.height_at(1.5, 0.0) == pytest.approx(0.16)
        assert hm.height_at(1.5, -0.8) == pytest.approx(0.16)

    def test_two_steps_cumulative(self):
        hm = make_stairs([(1.0, 0.1, 0.0), (1.5, -0.04, 0.0)])
        assert hm.height_at(0.5, 0.0) == pytest.approx(0.0)
        assert hm.height_at(1.2, 0.0) == pytest.approx(0.1)
        assert hm.height_at(2.0, 0.0) == pytest.approx(0.1 - 0.04)

    def test_deterministic(self):
        a = make_stairs([(1.0, 0.1, 0.2)])
        b = make_stairs([(1.0, 0.1, 0.2)])
        assert np.array_equal(a.heights, b.heights)


class TestHeightQueries:
    def test_cell_center_exact(self):
        rng = np.random.default_rng(3)
        hm = Heightmap(rng.normal(0, 0.1, (20, 30)), 0.05, origin=(-0.2, 0.1))
        for i, j in ((0, 0), (7, 13), (19, 29)):
            x = hm.origin[0] + 0.05 * j
            y = hm.origin[1] + 0.05 * i
            assert hm.height_at(x, y) == pytest.approx(hm.heights[i, j],
                                                       abs=1e-12)

    def test_continuity(self):
        hm = make_stairs([(1.0, 0.16, 0.0)], resolution=0.02)
        xs = np.linspace(0.5, 1.5, 400)
        h = np.array([hm.height_at(x, 0.0) for x in xs])
        assert np.abs(np.diff(h)).max() < 0.16 * 0.3  # no jumps at query level

    def test_flat_map_zero_cost(self):
        hm = flat_map()
        for x, y in ((0.0, 0.0), (1.3, -0.7), (3.9, 1.2)):
            assert hm.slope_cost_at(x, y) == pytest.approx(0.0, abs=1e-12)

    def test_inclined_plane_cost_analytic(self):
        # plane with grade 0.1 along x: smoothed map equals the plane away
        # from borders, so the cost is k_slope * 0.1 in the interior
        res = 0.02
        cols, rows = 200, 100
        xs = res * np.arange(cols)
        grid = np.tile(0.1 * xs, (rows, 1))
        hm = Heightmap(grid, res, k_slope=2.0)
        interior = hm.slope_cost_at(2.0, 1.0)
        assert interior == pytest.approx(2.0 * 0.1, rel=1e-6)


class TestCsvRoundtrip:
    def test_save_load(self, tmp_path):
        rng = np.random.default_rng(5)
        hm = Heightmap(rng.normal(0, 0.05, (12, 17)), 0.04, origin=(0.3, -0.9))
        path = tmp_path / "map.csv"
        hm.save_csv(path)
        loaded = Heightmap.load_csv(path)
        assert np.array_equal(loaded.heights, hm.heights)
        assert loaded.resolution == hm.resolution
        assert loaded.origin == hm.origin


class TestExtractEdges:
    def test_flat_is_empty(self):
        assert extract_edges(flat_map()) == []

    def test_single_step_recovered(self):
        hm = make_stairs([(1.0, 0.1, 0.0)], resolution=0.02)
        edges = extract_edges(hm)
        assert len(edges) == 1
        e = edges[0]
        assert abs(e.point[0] - 1.0) <= hm.resolution
        assert e.height_change == pytest.approx(0.1, abs=1e-9)
        assert abs(e.yaw) < np.deg2rad(2.0)

    def test_yawed_step_recovered(self):
        yaw = np.deg2rad(10.0)
        hm = make_stairs([(1.2, -0.08, yaw)], resolution=0.02)
        edges = extract_edges(hm)
        assert len(edges) == 1
        assert abs(edges[0].yaw - yaw) < np.deg2rad(2.0)
        assert edges[0].height_change == pytest.approx(-0.08, abs=1e-9)

    def test_random_stairs_in_parameter_ranges(self):
        from rhloco.terrain import sample_stairs_spec
        rng = np.random.default_rng(11)
        for _ in range(25):
            spec = sample_stairs_spec(rng, int(rng.integers(1, 4)))
            spec = [s for s in spec if abs(s[1]) > 0.03]
            hm = make_stairs(spec, resolution=0.02)
            edges = extract_edges(hm)
            assert len(edges) == len(spec)
            for (xd, dh, yw), e in zip(spec, edges):
                assert abs(e.point[0] - xd) <= 3 * hm.resolution
                assert e.height_change == pytest.approx(dh, abs=1e-9)
                assert abs(e.yaw - yw) < np.deg2rad(2.0)


class TestNearestObstacles:
    def test_flat_gives_sentinels(self):
        obs = nearest_obstacles([], (0.0, 0.0, 0.0))
        assert obs.shape == (2, 4)
        assert np.array_equal(obs[0], sentinel_obstacle())
        assert np.array_equal(obs[1], sentinel_obstacle())

    def test_three_edges_two_nearest_sorted(self):
        hm = make_stairs([(1.0, 0.1, 0.0), (1.6, 0.1, 0.0), (2.4, 0.1, 0.0)])
        edges = extract_edges(hm)
        obs = nearest_obstacles(edges, (0.0, 0.0, 0.0))
        assert obs[0, 0] < obs[1, 0]
        assert obs[0, 0] == pytest.approx(1.0, abs=0.05)
        assert obs[1, 0] == pytest.approx(1.6, abs=0.05)

    def test_edge_behind_is_padded(self):
        hm = make_stairs([(1.0, 0.1, 0.0)])
        edges = extract_edges(hm)
        obs = nearest_obstacles(edges, (2.5, 0.0, 0.0))  # robot past the edge
        assert np.array_equal(obs[0], sentinel_obstacle())
        assert np.array_equal(obs[1], sentinel_obstacle())
