#!/usr/bin/env python3
"""Benchmark the numba kernels against the vectorized numpy fallbacks.

Workloads mirror the hot paths of a corridor run: a 360-beam scan over
a cluttered world, the per-beam grid trace, one MPPI batch, and a full
costmap inflation.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import math
import time

import numpy as np

from deliverybot.kernels import np_impl

try:
    from deliverybot.kernels import nb_impl
except ImportError:
    nb_impl = None


def timeit(fn, repeat):
    fn()  # warm-up (JIT compile / cache load)
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def make_workloads(rng):
    rects = []
    for _ in range(12):
        x0, y0 = rng.uniform(0, 9, size=2)
        rects.append((x0, y0, x0 + rng.uniform(0.3, 1.5), y0 + rng.uniform(0.3, 1.5)))
    rects = np.array(rects)
    angles = np.linspace(-math.pi, math.pi, 360)
    dirx, diry = np.cos(angles), np.sin(angles)

    grid = np.zeros((200, 160))
    ranges = rng.uniform(0.5, 6.0, size=360)
    ex = 5.0 + dirx * ranges
    ey = 4.0 + diry * ranges
    hit = rng.random(360) < 0.8

    lethal = rng.random((200, 160)) < 0.02
    norm = rng.random((200, 160)) * (~lethal)
    controls = rng.normal(0.5, 0.3, size=(256, 30, 2))
    path = rng.uniform(0, 8, size=(300, 2))
    tracks = np.array([[4.0, 3.0, 0.2, 0.1, 0.4, 0.4]])

    occ = rng.random((200, 160)) < 0.01

    return {
        "raycast 360x12": lambda impl: impl.raycast(5.0, 4.0, dirx, diry, rects, 8.0),
        "trace 360 beams": lambda impl: impl.trace_beams(
            grid.copy(), 5.0, 4.0, ex, ey, hit, 0.0, 0.0, 0.05, -0.4, 0.85, 10.0),
        "mppi 256x30": lambda impl: impl.rollout_costs(
            np.array([5.0, 4.0, 0.3]), controls, 0.1, lethal, norm, 0.0, 0.0,
            0.05, path, np.array([8.0, 6.0]), tracks, 10.0, 2.0, 5.0, 0.1, 0.3, 1e6),
        "inflate 200x160": lambda impl: impl.inflate_costmap(occ, 0.05, 0.5),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    workloads = make_workloads(np.random.default_rng(7))
    print(f"{'kernel':<18} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for name, fn in workloads.items():
        t_np = timeit(lambda: fn(np_impl), args.repeat)
        if nb_impl is not None:
            t_nb = timeit(lambda: fn(nb_impl), args.repeat)
            print(f"{name:<18} {t_np * 1e3:>10.3f}ms {t_nb * 1e3:>10.3f}ms {t_np / t_nb:>8.1f}x")
        else:
            print(f"{name:<18} {t_np * 1e3:>10.3f}ms {'n/a':>12} {'':>9}")


if __name__ == "__main__":
    main()
