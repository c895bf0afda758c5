"""Log-odds occupancy grid built from LiDAR scans, plus costmap inflation.

Grids are numpy arrays indexed [ix, iy] with cell (0, 0) at the origin
corner; world x maps to the first axis.  Each beam carves free space
along its ray and bumps the endpoint cell when it hit something; the
no-hit sentinel (range == max_range) frees the whole ray.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .kinematics import ParameterError, Pose2D
from .plant import LidarParams, beam_angles

# Nudge hit endpoints just past the surface so the endpoint cell is the
# obstacle cell even when the hit lands exactly on a cell boundary.
ENDPOINT_NUDGE = 1e-9

# RLE cell codes for telemetry snapshots.
CELL_UNKNOWN = 0
CELL_FREE = 1
CELL_OCCUPIED = 2


@dataclass(frozen=True)
class OccupancyGrid:
    origin: tuple                 # world (x, y) of cell (0, 0) corner
    resolution: float = 0.05      # m per cell
    width: int = 0                # cells along x
    height: int = 0               # cells along y
    log_odds: np.ndarray = None   # (width, height) float64
    l_occ: float = 0.85
    l_free: float = -0.40
    l_max: float = 10.0
    occ_threshold: float = 2.0

    def __post_init__(self):
        if self.resolution <= 0:
            raise ParameterError(f"resolution must be > 0, got {self.resolution}")
        if self.log_odds is None:
            object.__setattr__(self, "log_odds", np.zeros((self.width, self.height)))

    @classmethod
    def for_bounds(cls, bounds, resolution=0.05, **kw):
        xmin, ymin, xmax, ymax = bounds
        width = int(math.ceil((xmax - xmin) / resolution))
        height = int(math.ceil((ymax - ymin) / resolution))
        return cls(origin=(xmin, ymin), resolution=resolution,
                   width=width, height=height, **kw)

    def cell_of(self, x: float, y: float):
        return (int(math.floor((x - self.origin[0]) / self.resolution)),
                int(math.floor((y - self.origin[1]) / self.resolution)))

    def contains_cell(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def occupied_mask(self) -> np.ndarray:
        return self.log_odds > self.occ_threshold

    def free_mask(self) -> np.ndarray:
        return self.log_odds < -self.occ_threshold


def update_grid(g: OccupancyGrid, pose: Pose2D, ranges: np.ndarray,
                lidar: LidarParams) -> OccupancyGrid:
    """Apply one scan taken at pose; returns the updated grid."""
    if not g.contains_cell(*g.cell_of(pose.x, pose.y)):
        raise ParameterError(f"scan pose {pose} outside the grid")
    angles = beam_angles(pose.theta, lidar)
    dir_x = np.cos(angles)
    dir_y = np.sin(angles)
    hit = np.asarray(ranges) < lidar.max_range
    reach = np.asarray(ranges, dtype=np.float64) + ENDPOINT_NUDGE
    end_x = pose.x + dir_x * reach
    end_y = pose.y + dir_y * reach
    log_odds = g.log_odds.copy()
    kernels.trace_beams(log_odds, pose.x, pose.y, end_x, end_y, hit,
                        g.origin[0], g.origin[1], g.resolution,
                        g.l_free, g.l_occ, g.l_max)
    return replace(g, log_odds=log_odds)


@dataclass(frozen=True)
class Costmap:
    origin: tuple
    resolution: float
    cost: np.ndarray              # (width, height) uint8, 255 = lethal
    inflation_radius: float

    @property
    def width(self):
        return self.cost.shape[0]

    @property
    def height(self):
        return self.cost.shape[1]

    def cell_of(self, x: float, y: float):
        return (int(math.floor((x - self.origin[0]) / self.resolution)),
                int(math.floor((y - self.origin[1]) / self.resolution)))

    def cell_center(self, ix: int, iy: int):
        return (self.origin[0] + (ix + 0.5) * self.resolution,
                self.origin[1] + (iy + 0.5) * self.resolution)

    def lethal_mask(self) -> np.ndarray:
        return self.cost == 255

    def normalized(self) -> np.ndarray:
        return self.cost.astype(np.float64) / 255.0


# Default: robot half-width 0.27 m plus 0.1 m margin.
DEFAULT_INFLATION_RADIUS = 0.37


def inflate(g: OccupancyGrid, inflation_radius: float = DEFAULT_INFLATION_RADIUS) -> Costmap:
    """Expand occupied cells into a planner costmap."""
    cost = kernels.inflate_costmap(g.occupied_mask(), g.resolution, inflation_radius)
    return Costmap(origin=g.origin, resolution=g.resolution, cost=cost,
                   inflation_radius=inflation_radius)


def grid_snapshot(g: OccupancyGrid) -> dict:
    """Run-length-encoded ternary snapshot for the telemetry stream.

    Cells flatten x-major (all y for ix=0, then ix=1, ...); runs are
    [code, count] pairs with codes 0 unknown, 1 free, 2 occupied.
    """
    ternary = np.zeros((g.width, g.height), dtype=np.uint8)
    ternary[g.free_mask()] = CELL_FREE
    ternary[g.occupied_mask()] = CELL_OCCUPIED
    flat = ternary.reshape(-1)
    runs = []
    if flat.size:
        boundaries = np.flatnonzero(np.diff(flat)) + 1
        starts = np.concatenate(([0], boundaries))
        ends = np.concatenate((boundaries, [flat.size]))
        runs = [[int(flat[s]), int(e - s)] for s, e in zip(starts, ends)]
    return {
        "origin": [g.origin[0], g.origin[1]],
        "resolution": g.resolution,
        "width": g.width,
        "height": g.height,
        "rle": runs,
    }


def snapshot_to_array(snap: dict) -> np.ndarray:
    """Inverse of grid_snapshot (used by replay tooling and tests)."""
    flat = np.zeros(snap["width"] * snap["height"], dtype=np.uint8)
    pos = 0
    for code, count in snap["rle"]:
        flat[pos : pos + count] = code
        pos += count
    return flat.reshape(snap["width"], snap["height"])
