"""Vectorized numpy kernel implementations.

Reference/fallback backend.  Algorithms mirror nb_impl expression for
expression so both paths produce the same traversal cells and matching
reductions; see that module for the shared semantics.
"""

import math

import numpy as np

NAME = "numpy"

_STRAIGHT_EPS = 1e-9


def raycast(ox, oy, dir_x, dir_y, rects, max_range):
    b = len(dir_x)
    if len(rects) == 0:
        return np.full(b, max_range, dtype=np.float64)
    dir_x = np.asarray(dir_x, dtype=np.float64)
    dir_y = np.asarray(dir_y, dtype=np.float64)
    rects = np.asarray(rects, dtype=np.float64)
    xmin, ymin, xmax, ymax = rects[:, 0], rects[:, 1], rects[:, 2], rects[:, 3]

    with np.errstate(divide="ignore", invalid="ignore"):
        inv_x = 1.0 / dir_x
        inv_y = 1.0 / dir_y
        t1 = (xmin[None, :] - ox) * inv_x[:, None]
        t2 = (xmax[None, :] - ox) * inv_x[:, None]
        u1 = (ymin[None, :] - oy) * inv_y[:, None]
        u2 = (ymax[None, :] - oy) * inv_y[:, None]

    par_x = (dir_x == 0.0)[:, None]
    in_x = ((xmin[None, :] <= ox) & (ox <= xmax[None, :])) & par_x
    par_y = (dir_y == 0.0)[:, None]
    in_y = ((ymin[None, :] <= oy) & (oy <= ymax[None, :])) & par_y

    txmin = np.where(par_x, np.where(in_x, -np.inf, np.inf), np.minimum(t1, t2))
    txmax = np.where(par_x, np.where(in_x, np.inf, -np.inf), np.maximum(t1, t2))
    tymin = np.where(par_y, np.where(in_y, -np.inf, np.inf), np.minimum(u1, u2))
    tymax = np.where(par_y, np.where(in_y, np.inf, -np.inf), np.maximum(u1, u2))

    tmin = np.maximum(txmin, tymin)
    tmax = np.minimum(txmax, tymax)
    hit = (tmax >= tmin) & (tmax >= 0.0)
    t_hit = np.where(hit, np.maximum(tmin, 0.0), np.inf)
    return np.minimum(t_hit.min(axis=1), max_range)


def _segment_cells(gx0, gy0, gx1, gy1):
    """Cells whose interior the segment passes through, in order.

    Crossing-parameter method: collect the parameters where the segment
    crosses integer grid lines, then take the cell of each interval
    midpoint.  Exact corner crossings produce one shared parameter and
    therefore a diagonal step.
    """
    dgx = gx1 - gx0
    dgy = gy1 - gy0
    parts = [np.array([0.0, 1.0])]
    if dgx > 0.0:
        ks = np.arange(math.floor(gx0) + 1, math.ceil(gx1), dtype=np.float64)
        parts.append((ks - gx0) / dgx)
    elif dgx < 0.0:
        ks = np.arange(math.floor(gx1) + 1, math.ceil(gx0), dtype=np.float64)
        parts.append((ks - gx0) / dgx)
    if dgy > 0.0:
        ks = np.arange(math.floor(gy0) + 1, math.ceil(gy1), dtype=np.float64)
        parts.append((ks - gy0) / dgy)
    elif dgy < 0.0:
        ks = np.arange(math.floor(gy1) + 1, math.ceil(gy0), dtype=np.float64)
        parts.append((ks - gy0) / dgy)
    ts = np.unique(np.concatenate(parts))
    mids = 0.5 * (ts[:-1] + ts[1:])
    ix = np.floor(gx0 + dgx * mids).astype(np.int64)
    iy = np.floor(gy0 + dgy * mids).astype(np.int64)
    if len(ix) > 1:
        keep = np.empty(len(ix), dtype=bool)
        keep[0] = True
        keep[1:] = (ix[1:] != ix[:-1]) | (iy[1:] != iy[:-1])
        ix, iy = ix[keep], iy[keep]
    return ix, iy


def _clip_exit(gx0, gy0, dgx, dgy, nx, ny):
    """Parameter at which the segment leaves [0, nx) x [0, ny)."""
    t_exit = 1.0
    if dgx > 0.0:
        t_exit = min(t_exit, ((nx - 1e-9) - gx0) / dgx)
    elif dgx < 0.0:
        t_exit = min(t_exit, (0.0 - gx0) / dgx)
    if dgy > 0.0:
        t_exit = min(t_exit, ((ny - 1e-9) - gy0) / dgy)
    elif dgy < 0.0:
        t_exit = min(t_exit, (0.0 - gy0) / dgy)
    return t_exit


def trace_beams(log_odds, ox, oy, end_x, end_y, hit, origin_x, origin_y,
                resolution, l_free, l_occ, l_max):
    nx, ny = log_odds.shape
    gx0 = (ox - origin_x) / resolution
    gy0 = (oy - origin_y) / resolution
    if not (0.0 <= gx0 < nx and 0.0 <= gy0 < ny):
        return
    for b in range(len(end_x)):
        gx1 = (end_x[b] - origin_x) / resolution
        gy1 = (end_y[b] - origin_y) / resolution
        dgx = gx1 - gx0
        dgy = gy1 - gy0
        t_exit = _clip_exit(gx0, gy0, dgx, dgy, nx, ny)
        clipped = t_exit < 1.0
        if clipped:
            if t_exit <= 0.0:
                continue
            gx1 = gx0 + dgx * t_exit
            gy1 = gy0 + dgy * t_exit
        ix, iy = _segment_cells(gx0, gy0, gx1, gy1)
        mark_end = bool(hit[b]) and not clipped
        if mark_end:
            fx, fy = ix[:-1], iy[:-1]
        else:
            fx, fy = ix, iy
        if len(fx):
            log_odds[fx, fy] = np.clip(log_odds[fx, fy] + l_free, -l_max, l_max)
        if mark_end:
            ex, ey = ix[-1], iy[-1]
            log_odds[ex, ey] = min(max(log_odds[ex, ey] + l_occ, -l_max), l_max)


def rollout_costs(pose, controls, dt, lethal, norm_cost, origin_x, origin_y,
                  resolution, path_pts, goal, tracks, w_obs, w_path, w_goal,
                  w_ctrl, w_progress, lethal_penalty):
    k_count, horizon, _ = controls.shape
    nx, ny = lethal.shape
    x = np.full(k_count, pose[0])
    y = np.full(k_count, pose[1])
    th = np.full(k_count, pose[2])
    costs = np.zeros(k_count)
    collided = np.zeros(k_count, dtype=np.bool_)
    px = path_pts[:, 0]
    py = path_pts[:, 1]

    for t in range(horizon):
        v = controls[:, t, 0]
        w = controls[:, t, 1]
        th_new = th + w * dt
        straight = np.abs(w) <= _STRAIGHT_EPS
        with np.errstate(divide="ignore", invalid="ignore"):
            radius = v / w
            x_arc = x + radius * (np.sin(th_new) - np.sin(th))
            y_arc = y - radius * (np.cos(th_new) - np.cos(th))
        x_str = x + v * np.cos(th) * dt
        y_str = y + v * np.sin(th) * dt
        x = np.where(straight, x_str, x_arc)
        y = np.where(straight, y_str, y_arc)
        th = th_new

        gi = np.floor((x - origin_x) / resolution).astype(np.int64)
        gj = np.floor((y - origin_y) / resolution).astype(np.int64)
        inb = (gi >= 0) & (gi < nx) & (gj >= 0) & (gj < ny)
        gi_c = np.clip(gi, 0, nx - 1)
        gj_c = np.clip(gj, 0, ny - 1)
        leth = np.where(inb, lethal[gi_c, gj_c], True)
        ncost = np.where(inb, norm_cost[gi_c, gj_c], 0.0)
        time_ahead = (t + 1) * dt
        for tr in range(len(tracks)):
            cx = tracks[tr, 0] + tracks[tr, 2] * time_ahead
            cy = tracks[tr, 1] + tracks[tr, 3] * time_ahead
            inside = (np.abs(x - cx) <= tracks[tr, 4]) & (np.abs(y - cy) <= tracks[tr, 5])
            leth = leth | inside
        collided |= leth
        obs = np.where(leth, lethal_penalty, ncost)

        d2 = ((x[:, None] - px[None, :]) ** 2 + (y[:, None] - py[None, :]) ** 2).min(axis=1)
        g2 = (x - goal[0]) ** 2 + (y - goal[1]) ** 2
        costs += w_obs * obs + w_path * d2 + w_ctrl * (v * v + w * w) + w_progress * g2

    costs += w_goal * ((x - goal[0]) ** 2 + (y - goal[1]) ** 2)
    return costs, collided


def inflate_costmap(occupied, resolution, inflation_radius):
    nx, ny = occupied.shape
    cost = np.zeros((nx, ny), dtype=np.uint8)
    if inflation_radius > 0:
        r_cells = int(math.floor(inflation_radius / resolution))
        for di in range(-r_cells, r_cells + 1):
            for dj in range(-r_cells, r_cells + 1):
                if di == 0 and dj == 0:
                    continue
                d = math.sqrt(di * di + dj * dj) * resolution
                if d > inflation_radius:
                    continue
                val = int(254.0 * (1.0 - d / inflation_radius))
                if val <= 0:
                    continue
                sx0, sx1 = max(0, -di), min(nx, nx - di)
                sy0, sy1 = max(0, -dj), min(ny, ny - dj)
                if sx0 >= sx1 or sy0 >= sy1:
                    continue
                src = occupied[sx0:sx1, sy0:sy1]
                dst = cost[sx0 + di : sx1 + di, sy0 + dj : sy1 + dj]
                np.maximum(dst, np.where(src, np.uint8(val), np.uint8(0)), out=dst)
    cost[occupied] = 255
    return cost
