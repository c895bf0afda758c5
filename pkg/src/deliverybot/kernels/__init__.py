"""Hot numeric kernels with selectable backends.

The inner loops that dominate runtime (LiDAR raycasting, per-beam grid
traversal, MPPI rollouts, costmap inflation) exist twice: numba-jitted
scalar loops in nb_impl and vectorized numpy in np_impl.  Both compute
the same expressions in the same order, so results agree to the last
bit for traversal cells and to float rounding for reductions.

Selection is controlled by the DELIVERYBOT_NUMBA environment variable:

    unset  prefer numba, fall back to numpy if numba is unavailable
    "0"    force the numpy path
    "1"    require numba (ImportError if missing)

The import of numba is deferred to first kernel use so light CLI paths
(e.g. the sizing command) never pay its startup cost.
"""

import os

_backend = None


def _resolve():
    global _backend
    if _backend is None:
        flag = os.environ.get("DELIVERYBOT_NUMBA", "").strip()
        if flag == "0":
            from . import np_impl as mod
        elif flag == "1":
            from . import nb_impl as mod
        else:
            try:
                from . import nb_impl as mod
            except ImportError:
                from . import np_impl as mod
        _backend = mod
    return _backend


def backend_name() -> str:
    return _resolve().NAME


def raycast(ox, oy, dir_x, dir_y, rects, max_range):
    """Exact ranges from (ox, oy) along each unit direction to the
    nearest axis-aligned rectangle, capped at max_range (no noise)."""
    return _resolve().raycast(ox, oy, dir_x, dir_y, rects, max_range)


def trace_beams(log_odds, ox, oy, end_x, end_y, hit, origin_x, origin_y,
                resolution, l_free, l_occ, l_max):
    """Apply one scan to a log-odds grid in place.

    Per beam, every cell the segment passes through gets l_free except
    the endpoint cell, which gets l_occ when the beam hit something.
    Beams are clipped at the grid boundary; values clamp to +-l_max.
    """
    return _resolve().trace_beams(
        log_odds, ox, oy, end_x, end_y, hit, origin_x, origin_y,
        resolution, l_free, l_occ, l_max,
    )


def rollout_costs(pose, controls, dt, lethal, norm_cost, origin_x, origin_y,
                  resolution, path_pts, goal, tracks, w_obs, w_path, w_goal,
                  w_ctrl, w_progress, lethal_penalty):
    """Trajectory cost of each sampled control sequence.

    Returns (costs[K], collided[K]); collided marks rollouts that touch
    a lethal cell, a predicted obstacle box, or leave the grid.
    """
    return _resolve().rollout_costs(
        pose, controls, dt, lethal, norm_cost, origin_x, origin_y,
        resolution, path_pts, goal, tracks, w_obs, w_path, w_goal,
        w_ctrl, w_progress, lethal_penalty,
    )


def inflate_costmap(occupied, resolution, inflation_radius):
    """Brute-force obstacle inflation: occupied cells are lethal (255),
    cost decays linearly to 0 at inflation_radius."""
    return _resolve().inflate_costmap(occupied, resolution, inflation_radius)
