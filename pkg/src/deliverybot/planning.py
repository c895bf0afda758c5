"""Hierarchical planner: A* route on the costmap, constant-velocity
obstacle tracks, and an MPPI local controller.

MPPI: perturb the nominal control sequence with Gaussian noise, roll
each sample out through the exact-arc kinematics over the costmap plus
extrapolated obstacle tracks, weight samples by exp(-cost/lambda), and
advance the noise-weighted average one step (receding horizon).
"""

import heapq
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .kinematics import Pose2D, Twist2D
from .mapping import Costmap

LETHAL_PENALTY = 1e6

SQRT2 = math.sqrt(2.0)


class PlanningError(Exception):
    pass


class NoPathError(PlanningError):
    pass


class InvalidEndpointError(PlanningError):
    pass


@dataclass(frozen=True)
class PlannedPath:
    waypoints: np.ndarray  # (N, 2) world points at cell centers
    cost: float


def astar(c: Costmap, start, goal, alpha: float = 0.25) -> PlannedPath:
    """8-connected A* from start to goal (world coordinates).

    Edge cost is the Euclidean step in meters plus alpha times the
    normalized inflation cost of the target cell; the Euclidean-distance
    heuristic stays admissible because that addition is nonnegative.
    Ties break deterministically on (f, h, cell index).
    """
    lethal = c.lethal_mask()
    norm = c.normalized()
    nx, ny = c.cost.shape
    res = c.resolution
    s = c.cell_of(*start)
    g = c.cell_of(*goal)
    for name, cell in (("start", s), ("goal", g)):
        if not (0 <= cell[0] < nx and 0 <= cell[1] < ny):
            raise InvalidEndpointError(f"{name} cell {cell} outside costmap")
        if lethal[cell]:
            raise InvalidEndpointError(f"{name} cell {cell} is lethal")

    def h(cell):
        return math.hypot(cell[0] - g[0], cell[1] - g[1]) * res

    g_score = {s: 0.0}
    came = {}
    closed = set()
    start_h = h(s)
    heap = [(start_h, start_h, s[0] * ny + s[1], s)]
    while heap:
        _, _, _, cell = heapq.heappop(heap)
        if cell in closed:
            continue
        closed.add(cell)
        if cell == g:
            cells = [cell]
            while cell in came:
                cell = came[cell]
                cells.append(cell)
            cells.reverse()
            pts = np.array([c.cell_center(ix, iy) for ix, iy in cells])
            return PlannedPath(waypoints=pts, cost=g_score[g])
        base = g_score[cell]
        cx, cy = cell
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                n = (cx + dx, cy + dy)
                if not (0 <= n[0] < nx and 0 <= n[1] < ny) or n in closed:
                    continue
                if lethal[n]:
                    continue
                step = (SQRT2 if dx and dy else 1.0) * res
                cand = base + step + alpha * norm[n]
                if cand < g_score.get(n, math.inf):
                    g_score[n] = cand
                    came[n] = cell
                    hn = h(n)
                    heapq.heappush(heap, (cand + hn, hn, n[0] * ny + n[1], n))
    raise NoPathError(f"no path from {s} to {g}")


@dataclass(frozen=True)
class TrackedObstacle:
    track_id: int
    center: tuple
    velocity: tuple
    extents: tuple        # full (x, y) footprint lengths
    history_length: int

    def extrapolate(self, tau: float):
        return (self.center[0] + self.velocity[0] * tau,
                self.center[1] + self.velocity[1] * tau)


def predict_tracks(history: dict) -> list:
    """Constant-velocity tracks from per-id observation lists.

    history maps id -> [(t, (x, y), (extent_x, extent_y)), ...] with
    strictly increasing timestamps; velocity comes from the last two
    observations, zero when underdetermined.
    """
    tracks = []
    for track_id in sorted(history):
        obs = history[track_id]
        if not obs:
            continue
        t1, c1, ext = obs[-1]
        if len(obs) >= 2:
            t0, c0, _ = obs[-2]
            if not t1 > t0:
                raise PlanningError(f"track {track_id} timestamps not increasing")
            inv = 1.0 / (t1 - t0)
            vel = ((c1[0] - c0[0]) * inv, (c1[1] - c0[1]) * inv)
        else:
            vel = (0.0, 0.0)
        tracks.append(TrackedObstacle(track_id=track_id, center=tuple(c1),
                                      velocity=vel, extents=tuple(ext),
                                      history_length=len(obs)))
    return tracks


@dataclass(frozen=True)
class MppiParams:
    k_rollouts: int = 256
    horizon: int = 30
    dt: float = 0.1
    temperature: float = 1.0
    sigma_v: float = 0.3
    sigma_omega: float = 0.5
    w_obs: float = 10.0
    w_path: float = 2.0
    w_goal: float = 5.0
    w_ctrl: float = 0.1
    w_progress: float = 0.3
    v_bounds: tuple = (-0.5, 1.5)
    omega_bounds: tuple = (-2.0, 2.0)

    def __post_init__(self):
        if self.k_rollouts < 1 or self.horizon < 1 or self.temperature <= 0:
            raise ValueError("K >= 1, H >= 1, lambda > 0 required")
        if self.sigma_v < 0 or self.sigma_omega < 0:
            raise ValueError("sigmas must be >= 0")
        if min(self.w_obs, self.w_path, self.w_goal, self.w_ctrl, self.w_progress) < 0:
            raise ValueError("weights must be >= 0")


@dataclass(frozen=True)
class MppiDiagnostics:
    min_cost: float
    mean_cost: float
    effective_samples: float
    safe_stop: bool


def empty_nominal(p: MppiParams) -> np.ndarray:
    return np.zeros((p.horizon, 2))


def softmax_weights(costs: np.ndarray, temperature: float) -> np.ndarray:
    """exp(-(c - min c) / lambda), normalized; invariant to adding a
    constant to every cost."""
    shifted = costs - costs.min()
    w = np.exp(-shifted / temperature)
    return w / w.sum()


def _track_array(tracks, margin: float) -> np.ndarray:
    arr = np.zeros((len(tracks), 6))
    for i, tr in enumerate(tracks):
        arr[i] = (tr.center[0], tr.center[1], tr.velocity[0], tr.velocity[1],
                  tr.extents[0] / 2 + margin, tr.extents[1] / 2 + margin)
    return arr


def mppi_plan(state: Pose2D, nominal: np.ndarray, path: PlannedPath, c: Costmap,
              tracks: list, p: MppiParams, rng: np.random.Generator):
    """One receding-horizon MPPI step.

    Returns (Twist2D command, next nominal sequence, diagnostics).  When
    every rollout is predicted to collide the command is a SafeStop
    (zero twist, flag set, nominal reset).
    """
    if len(path.waypoints) == 0:
        raise PlanningError("empty path")
    noise = rng.normal(size=(p.k_rollouts, p.horizon, 2))
    noise[:, :, 0] *= p.sigma_v
    noise[:, :, 1] *= p.sigma_omega
    controls = nominal[None, :, :] + noise
    controls[:, :, 0] = np.clip(controls[:, :, 0], *p.v_bounds)
    controls[:, :, 1] = np.clip(controls[:, :, 1], *p.omega_bounds)

    costs, collided = kernels.rollout_costs(
        np.array([state.x, state.y, state.theta]), controls, p.dt,
        c.lethal_mask(), c.normalized(), c.origin[0], c.origin[1], c.resolution,
        path.waypoints, path.waypoints[-1],
        _track_array(tracks, margin=c.inflation_radius),
        p.w_obs, p.w_path, p.w_goal, p.w_ctrl, p.w_progress, LETHAL_PENALTY,
    )

    if collided.all():
        diag = MppiDiagnostics(float(costs.min()), float(costs.mean()), 0.0, True)
        return Twist2D(0.0, 0.0), empty_nominal(p), diag

    weights = softmax_weights(costs, p.temperature)
    delta = np.einsum("k,khc->hc", weights, noise)
    updated = nominal + delta
    updated[:, 0] = np.clip(updated[:, 0], *p.v_bounds)
    updated[:, 1] = np.clip(updated[:, 1], *p.omega_bounds)

    command = Twist2D(float(updated[0, 0]), float(updated[0, 1]))
    next_nominal = np.vstack([updated[1:], updated[-1:]])
    ess = float(1.0 / np.square(weights).sum())
    diag = MppiDiagnostics(float(costs.min()), float(costs.mean()), ess, False)
    return command, next_nominal, diag
