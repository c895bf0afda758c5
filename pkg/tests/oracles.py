"""Independent reference implementations used to freeze expected values.

Each oracle deliberately uses a different algorithm than the production
code it checks: brute force, dense sampling, finite differences, or
bit-serial computation.
"""

import heapq
import math

import numpy as np


def euler_integrate(x, y, theta, v, omega, dt, n_steps):
    """Straight-line Euler sub-stepping; converges to the exact arc."""
    h = dt / n_steps
    for _ in range(n_steps):
        x += v * math.cos(theta) * h
        y += v * math.sin(theta) * h
        theta += omega * h
    return x, y, theta


def crc16_bitserial(data: bytes) -> int:
    """CRC-16/CCITT-FALSE, one bit at a time: poly 0x1021, init 0xFFFF,
    no input/output reflection, no final xor."""
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            if crc & 0x8000:
                crc = ((crc << 1) ^ 0x1021) & 0xFFFF
            else:
                crc = (crc << 1) & 0xFFFF
    return crc


def dijkstra_grid(cost, lethal, start, goal, resolution, alpha):
    """Uniform-cost search over the 8-connected grid.

    Edge cost matches the planner contract: Euclidean step length in
    meters plus alpha * normalized inflation cost of the target cell.
    Returns the minimal path cost or None if unreachable.
    """
    h_cells, w_cells = cost.shape
    dist = {start: 0.0}
    pq = [(0.0, start)]
    visited = set()
    while pq:
        d, cell = heapq.heappop(pq)
        if cell in visited:
            continue
        visited.add(cell)
        if cell == goal:
            return d
        ci, cj = cell
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                ni, nj = ci + di, cj + dj
                if not (0 <= ni < h_cells and 0 <= nj < w_cells):
                    continue
                if lethal[ni, nj]:
                    continue
                step = math.hypot(di, dj) * resolution
                nd = d + step + alpha * (cost[ni, nj] / 255.0)
                if nd < dist.get((ni, nj), math.inf):
                    dist[(ni, nj)] = nd
                    heapq.heappush(pq, (nd, (ni, nj)))
    return None


def raymarch_range(ox, oy, angle, rects, max_range, coarse=2e-4):
    """Brute-force ray range: march until inside any rectangle, then
    bisect the bracketing interval down to ~1e-12 m."""
    dx, dy = math.cos(angle), math.sin(angle)

    def inside(t):
        px, py = ox + dx * t, oy + dy * t
        for (xmin, ymin, xmax, ymax) in rects:
            if xmin <= px <= xmax and ymin <= py <= ymax:
                return True
        return False

    n = int(max_range / coarse) + 1
    prev = 0.0
    for i in range(1, n + 1):
        t = min(i * coarse, max_range)
        if inside(t):
            lo, hi = prev, t
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if inside(mid):
                    hi = mid
                else:
                    lo = mid
            return hi
        prev = t
        if t >= max_range:
            break
    return max_range


def cells_by_sampling(x0, y0, x1, y1, origin_x, origin_y, resolution, samples_per_cell=200):
    """Grid cells whose interior a segment passes through, found by
    dense point sampling (excludes zero-measure corner touches)."""
    length = math.hypot(x1 - x0, y1 - y0)
    n = max(2, int(length / resolution * samples_per_cell))
    cells = []
    seen = set()
    for i in range(n + 1):
        t = i / n
        px = x0 + (x1 - x0) * t
        py = y0 + (y1 - y0) * t
        cell = (
            int(math.floor((px - origin_x) / resolution)),
            int(math.floor((py - origin_y) / resolution)),
        )
        if cell not in seen:
            seen.add(cell)
            cells.append(cell)
    return cells


def numeric_jacobian(f, x, eps=1e-6):
    """Central finite-difference Jacobian of f: R^n -> R^m."""
    x = np.asarray(x, dtype=float)
    fx = np.asarray(f(x))
    jac = np.zeros((fx.size, x.size))
    for i in range(x.size):
        dx = np.zeros_like(x)
        dx[i] = eps
        hi = np.asarray(f(x + dx))
        lo = np.asarray(f(x - dx))
        jac[:, i] = (hi - lo) / (2 * eps)
    return jac
