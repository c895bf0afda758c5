"""Numba-jitted kernel implementations.

Scalar-loop twins of np_impl: the per-beam traversal uses the same
crossing-parameter construction and the rollout accumulates costs in
the same per-step order, so the two backends agree (bit-exact for cell
traversal, float-rounding-close for trig-heavy reductions).
"""

import math

import numpy as np
from numba import njit

NAME = "numba"

_STRAIGHT_EPS = 1e-9


@njit(cache=True)
def _raycast_impl(ox, oy, dir_x, dir_y, rects, max_range):
    b_count = dir_x.shape[0]
    r_count = rects.shape[0]
    out = np.empty(b_count, dtype=np.float64)
    for b in range(b_count):
        dx = dir_x[b]
        dy = dir_y[b]
        best = max_range
        for r in range(r_count):
            xmin = rects[r, 0]
            ymin = rects[r, 1]
            xmax = rects[r, 2]
            ymax = rects[r, 3]
            if dx == 0.0:
                if xmin <= ox <= xmax:
                    txmin = -np.inf
                    txmax = np.inf
                else:
                    txmin = np.inf
                    txmax = -np.inf
            else:
                inv = 1.0 / dx
                t1 = (xmin - ox) * inv
                t2 = (xmax - ox) * inv
                txmin = min(t1, t2)
                txmax = max(t1, t2)
            if dy == 0.0:
                if ymin <= oy <= ymax:
                    tymin = -np.inf
                    tymax = np.inf
                else:
                    tymin = np.inf
                    tymax = -np.inf
            else:
                inv = 1.0 / dy
                u1 = (ymin - oy) * inv
                u2 = (ymax - oy) * inv
                tymin = min(u1, u2)
                tymax = max(u1, u2)
            tmin = max(txmin, tymin)
            tmax = min(txmax, tymax)
            if tmax >= tmin and tmax >= 0.0:
                t_hit = tmin if tmin > 0.0 else 0.0
                if t_hit < best:
                    best = t_hit
        out[b] = best
    return out


def raycast(ox, oy, dir_x, dir_y, rects, max_range):
    if len(rects) == 0:
        return np.full(len(dir_x), max_range, dtype=np.float64)
    return _raycast_impl(
        float(ox), float(oy),
        np.ascontiguousarray(dir_x, dtype=np.float64),
        np.ascontiguousarray(dir_y, dtype=np.float64),
        np.ascontiguousarray(rects, dtype=np.float64),
        float(max_range),
    )


@njit(cache=True)
def _trace_impl(log_odds, ox, oy, end_x, end_y, hit, origin_x, origin_y,
                resolution, l_free, l_occ, l_max):
    nx, ny = log_odds.shape
    gx0 = (ox - origin_x) / resolution
    gy0 = (oy - origin_y) / resolution
    if not (0.0 <= gx0 < nx and 0.0 <= gy0 < ny):
        return
    ts = np.empty(nx + ny + 2, dtype=np.float64)
    for b in range(end_x.shape[0]):
        gx1 = (end_x[b] - origin_x) / resolution
        gy1 = (end_y[b] - origin_y) / resolution
        dgx = gx1 - gx0
        dgy = gy1 - gy0
        # clip at the grid boundary
        t_exit = 1.0
        if dgx > 0.0:
            t_exit = min(t_exit, ((nx - 1e-9) - gx0) / dgx)
        elif dgx < 0.0:
            t_exit = min(t_exit, (0.0 - gx0) / dgx)
        if dgy > 0.0:
            t_exit = min(t_exit, ((ny - 1e-9) - gy0) / dgy)
        elif dgy < 0.0:
            t_exit = min(t_exit, (0.0 - gy0) / dgy)
        clipped = t_exit < 1.0
        if clipped:
            if t_exit <= 0.0:
                continue
            gx1 = gx0 + dgx * t_exit
            gy1 = gy0 + dgy * t_exit
            dgx = gx1 - gx0
            dgy = gy1 - gy0

        # crossing parameters of integer grid lines, plus the ends
        n = 0
        ts[n] = 0.0
        n += 1
        ts[n] = 1.0
        n += 1
        if dgx > 0.0:
            for k in range(int(math.floor(gx0)) + 1, int(math.ceil(gx1))):
                ts[n] = (k - gx0) / dgx
                n += 1
        elif dgx < 0.0:
            for k in range(int(math.floor(gx1)) + 1, int(math.ceil(gx0))):
                ts[n] = (k - gx0) / dgx
                n += 1
        if dgy > 0.0:
            for k in range(int(math.floor(gy0)) + 1, int(math.ceil(gy1))):
                ts[n] = (k - gy0) / dgy
                n += 1
        elif dgy < 0.0:
            for k in range(int(math.floor(gy1)) + 1, int(math.ceil(gy0))):
                ts[n] = (k - gy0) / dgy
                n += 1
        tv = np.sort(ts[:n])

        mark_end = hit[b] and not clipped
        prev_ix = -1
        prev_iy = -1
        have_prev = False
        for i in range(len(tv) - 1):
            if tv[i + 1] == tv[i]:
                continue
            tm = 0.5 * (tv[i] + tv[i + 1])
            ix = int(math.floor(gx0 + dgx * tm))
            iy = int(math.floor(gy0 + dgy * tm))
            if have_prev and ix == prev_ix and iy == prev_iy:
                continue
            if have_prev:
                # the previous cell is now known not to be the endpoint
                val = log_odds[prev_ix, prev_iy] + l_free
                if val > l_max:
                    val = l_max
                elif val < -l_max:
                    val = -l_max
                log_odds[prev_ix, prev_iy] = val
            prev_ix = ix
            prev_iy = iy
            have_prev = True
        if have_prev:
            inc = l_occ if mark_end else l_free
            val = log_odds[prev_ix, prev_iy] + inc
            if val > l_max:
                val = l_max
            elif val < -l_max:
                val = -l_max
            log_odds[prev_ix, prev_iy] = val


def trace_beams(log_odds, ox, oy, end_x, end_y, hit, origin_x, origin_y,
                resolution, l_free, l_occ, l_max):
    _trace_impl(
        log_odds, float(ox), float(oy),
        np.ascontiguousarray(end_x, dtype=np.float64),
        np.ascontiguousarray(end_y, dtype=np.float64),
        np.ascontiguousarray(hit, dtype=np.bool_),
        float(origin_x), float(origin_y), float(resolution),
        float(l_free), float(l_occ), float(l_max),
    )


@njit(cache=True)
def _rollout_impl(pose, controls, dt, lethal, norm_cost, origin_x, origin_y,
                  resolution, path_pts, goal, tracks, w_obs, w_path, w_goal,
                  w_ctrl, w_progress, lethal_penalty):
    k_count = controls.shape[0]
    horizon = controls.shape[1]
    nx, ny = lethal.shape
    p_count = path_pts.shape[0]
    t_count = tracks.shape[0]
    costs = np.zeros(k_count, dtype=np.float64)
    collided = np.zeros(k_count, dtype=np.bool_)
    for k in range(k_count):
        x = pose[0]
        y = pose[1]
        th = pose[2]
        acc = 0.0
        for t in range(horizon):
            v = controls[k, t, 0]
            w = controls[k, t, 1]
            th_new = th + w * dt
            if abs(w) <= _STRAIGHT_EPS:
                x = x + v * math.cos(th) * dt
                y = y + v * math.sin(th) * dt
            else:
                radius = v / w
                x = x + radius * (math.sin(th_new) - math.sin(th))
                y = y - radius * (math.cos(th_new) - math.cos(th))
            th = th_new

            gi = int(math.floor((x - origin_x) / resolution))
            gj = int(math.floor((y - origin_y) / resolution))
            if gi < 0 or gi >= nx or gj < 0 or gj >= ny:
                leth = True
                ncost = 0.0
            else:
                leth = lethal[gi, gj]
                ncost = norm_cost[gi, gj]
            time_ahead = (t + 1) * dt
            for tr in range(t_count):
                cx = tracks[tr, 0] + tracks[tr, 2] * time_ahead
                cy = tracks[tr, 1] + tracks[tr, 3] * time_ahead
                if abs(x - cx) <= tracks[tr, 4] and abs(y - cy) <= tracks[tr, 5]:
                    leth = True
            if leth:
                collided[k] = True
                obs = lethal_penalty
            else:
                obs = ncost

            d2 = np.inf
            for p in range(p_count):
                dx = x - path_pts[p, 0]
                dy = y - path_pts[p, 1]
                dd = dx * dx + dy * dy
                if dd < d2:
                    d2 = dd
            gx = x - goal[0]
            gy = y - goal[1]
            acc += w_obs * obs + w_path * d2 + w_ctrl * (v * v + w * w) + w_progress * (gx * gx + gy * gy)
        dx = x - goal[0]
        dy = y - goal[1]
        costs[k] = acc + w_goal * (dx * dx + dy * dy)
    return costs, collided


def rollout_costs(pose, controls, dt, lethal, norm_cost, origin_x, origin_y,
                  resolution, path_pts, goal, tracks, w_obs, w_path, w_goal,
                  w_ctrl, w_progress, lethal_penalty):
    return _rollout_impl(
        np.ascontiguousarray(pose, dtype=np.float64),
        np.ascontiguousarray(controls, dtype=np.float64),
        float(dt),
        np.ascontiguousarray(lethal, dtype=np.bool_),
        np.ascontiguousarray(norm_cost, dtype=np.float64),
        float(origin_x), float(origin_y), float(resolution),
        np.ascontiguousarray(path_pts, dtype=np.float64),
        np.ascontiguousarray(goal, dtype=np.float64),
        np.ascontiguousarray(tracks, dtype=np.float64).reshape(-1, 6),
        float(w_obs), float(w_path), float(w_goal), float(w_ctrl),
        float(w_progress), float(lethal_penalty),
    )


@njit(cache=True)
def _inflate_impl(occupied, resolution, inflation_radius, r_cells):
    nx, ny = occupied.shape
    cost = np.zeros((nx, ny), dtype=np.uint8)
    for i in range(nx):
        for j in range(ny):
            if not occupied[i, j]:
                continue
            for di in range(-r_cells, r_cells + 1):
                ni = i + di
                if ni < 0 or ni >= nx:
                    continue
                for dj in range(-r_cells, r_cells + 1):
                    if di == 0 and dj == 0:
                        continue
                    nj = j + dj
                    if nj < 0 or nj >= ny:
                        continue
                    d = math.sqrt(di * di + dj * dj) * resolution
                    if d > inflation_radius:
                        continue
                    val = int(254.0 * (1.0 - d / inflation_radius))
                    if val > cost[ni, nj]:
                        cost[ni, nj] = val
    for i in range(nx):
        for j in range(ny):
            if occupied[i, j]:
                cost[i, j] = 255
    return cost


def inflate_costmap(occupied, resolution, inflation_radius):
    occupied = np.ascontiguousarray(occupied, dtype=np.bool_)
    if inflation_radius > 0:
        r_cells = int(math.floor(inflation_radius / resolution))
    else:
        r_cells = 0
    return _inflate_impl(occupied, float(resolution), float(inflation_radius), r_cells)
