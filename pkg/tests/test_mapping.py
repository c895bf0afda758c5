import math

import numpy as np
import pytest

from deliverybot.kinematics import ParameterError, Pose2D
from deliverybot.mapping import (
    Costmap,
    OccupancyGrid,
    grid_snapshot,
    inflate,
    snapshot_to_array,
    update_grid,
)
from deliverybot.plant import LidarParams

from oracles import cells_by_sampling


def _grid(size=4.0, res=0.1):
    return OccupancyGrid.for_bounds((0, 0, size, size), resolution=res)


class TestUpdateGrid:
    def test_axis_aligned_beam_counts(self):
        g = _grid()
        pose = Pose2D(1.05, 2.05, 0.0)
        lidar = LidarParams(n_beams=1, fov=0.1, max_range=5.0, sigma_r=0.0)
        g2 = update_grid(g, pose, np.array([1.0]), lidar)
        freed = np.argwhere(g2.log_odds < 0)
        occ = np.argwhere(g2.log_odds > 0)
        assert len(freed) == 10  # robot cell through cell before endpoint
        assert len(occ) == 1
        assert tuple(occ[0]) == (20, 20)
        assert g2.log_odds[20, 20] == pytest.approx(0.85)
        assert g2.log_odds[15, 20] == pytest.approx(-0.40)

    def test_max_range_frees_whole_ray(self):
        g = _grid()
        lidar = LidarParams(n_beams=1, fov=0.1, max_range=1.5, sigma_r=0.0)
        g2 = update_grid(g, Pose2D(1.05, 2.05, 0.0), np.array([1.5]), lidar)
        assert not (g2.log_odds > 0).any()
        assert (g2.log_odds < 0).sum() == 16  # 15 traversed + endpoint cell

    def test_endpoint_saturates_at_l_max(self):
        g = _grid()
        lidar = LidarParams(n_beams=1, fov=0.1, max_range=5.0, sigma_r=0.0)
        pose = Pose2D(1.05, 2.05, 0.0)
        for _ in range(20):
            g = update_grid(g, pose, np.array([1.0]), lidar)
        assert g.log_odds[20, 20] == pytest.approx(g.l_max)
        assert g.log_odds.max() <= g.l_max
        assert g.log_odds.min() >= -g.l_max

    def test_beam_leaving_grid_clipped(self):
        g = _grid(size=2.0)
        lidar = LidarParams(n_beams=1, fov=0.1, max_range=10.0, sigma_r=0.0)
        g2 = update_grid(g, Pose2D(1.05, 1.05, 0.0), np.array([10.0]), lidar)
        # no endpoint bump, free cells only up to the boundary
        assert not (g2.log_odds > 0).any()
        assert (g2.log_odds < 0).any()

    def test_order_insensitive_when_unclamped(self):
        g = _grid()
        lidar = LidarParams(n_beams=45, fov=2 * math.pi, max_range=3.0, sigma_r=0.0)
        pose_a = Pose2D(1.31, 1.22, 0.3)
        pose_b = Pose2D(2.52, 2.71, -1.1)
        ranges_a = np.full(45, 1.1)
        ranges_b = np.full(45, 0.9)
        ab = update_grid(update_grid(g, pose_a, ranges_a, lidar), pose_b, ranges_b, lidar)
        ba = update_grid(update_grid(g, pose_b, ranges_b, lidar), pose_a, ranges_a, lidar)
        np.testing.assert_allclose(ab.log_odds, ba.log_odds, atol=1e-12)

    def test_traversal_matches_sampling_oracle(self):
        g = _grid()
        lidar = LidarParams(n_beams=1, fov=0.1, max_range=5.0, sigma_r=0.0)
        pose = Pose2D(1.13, 1.57, 0.77)
        rg = 1.7
        g2 = update_grid(g, pose, np.array([rg]), lidar)
        touched = {tuple(c) for c in np.argwhere(g2.log_odds != 0)}
        ex = pose.x + math.cos(pose.theta) * (rg + 1e-9)
        ey = pose.y + math.sin(pose.theta) * (rg + 1e-9)
        want = set(cells_by_sampling(pose.x, pose.y, ex, ey, 0.0, 0.0, 0.1))
        assert touched == want

    def test_pose_outside_grid_rejected(self):
        g = _grid(size=1.0)
        with pytest.raises(ParameterError):
            update_grid(g, Pose2D(5, 5, 0), np.array([1.0]),
                        LidarParams(n_beams=1, fov=0.1, max_range=2.0, sigma_r=0.0))

    def test_occupied_only_at_beam_endpoints(self):
        # monotone evidence: +l_occ lands only where an endpoint lies
        g = _grid()
        rng = np.random.default_rng(3)
        lidar = LidarParams(n_beams=30, fov=2 * math.pi, max_range=3.0, sigma_r=0.0)
        pose = Pose2D(2.03, 2.01, 0.2)
        ranges = rng.uniform(0.3, 2.9, size=30)
        g2 = update_grid(g, pose, ranges, lidar)
        from deliverybot.plant import beam_angles

        endpoint_cells = set()
        for ang, rg in zip(beam_angles(pose.theta, lidar), ranges):
            ex = pose.x + math.cos(ang) * (rg + 1e-9)
            ey = pose.y + math.sin(ang) * (rg + 1e-9)
            endpoint_cells.add(g.cell_of(ex, ey))
        positive = {tuple(c) for c in np.argwhere(g2.log_odds > 0)}
        assert positive <= endpoint_cells


class TestInflate:
    def test_empty_grid_zero_cost(self):
        cm = inflate(_grid())
        assert cm.cost.sum() == 0

    def test_lethal_superset_of_occupied(self):
        g = _grid()
        lo = g.log_odds.copy()
        lo[10, 10] = 5.0
        lo[20, 25] = 3.0
        g = OccupancyGrid(origin=g.origin, resolution=g.resolution, width=g.width,
                          height=g.height, log_odds=lo)
        cm = inflate(g, inflation_radius=0.3)
        occ = g.occupied_mask()
        assert (cm.lethal_mask() & occ).sum() == occ.sum()
        # decay: orthogonal neighbor cheaper than lethal, monotone outward
        assert 0 < cm.cost[11, 10] < 255
        assert cm.cost[12, 10] < cm.cost[11, 10]

    def test_free_threshold_symmetry(self):
        g = _grid()
        lo = g.log_odds.copy()
        lo[5, 5] = -3.0
        lo[6, 6] = 3.0
        g2 = OccupancyGrid(origin=g.origin, resolution=g.resolution, width=g.width,
                           height=g.height, log_odds=lo)
        assert g2.free_mask()[5, 5] and not g2.free_mask()[6, 6]
        assert g2.occupied_mask()[6, 6] and not g2.occupied_mask()[5, 5]


class TestSnapshot:
    def test_round_trip(self):
        g = _grid(size=1.0)
        lo = g.log_odds.copy()
        lo[2, 3] = 5.0
        lo[4:7, 1] = -5.0
        g = OccupancyGrid(origin=g.origin, resolution=g.resolution, width=g.width,
                          height=g.height, log_odds=lo)
        snap = grid_snapshot(g)
        arr = snapshot_to_array(snap)
        assert arr[2, 3] == 2
        assert arr[4, 1] == arr[5, 1] == arr[6, 1] == 1
        assert arr[0, 0] == 0
        assert sum(c for _, c in snap["rle"]) == g.width * g.height

    def test_rle_compresses_uniform_grid(self):
        snap = grid_snapshot(_grid())
        assert snap["rle"] == [[0, 40 * 40]]
