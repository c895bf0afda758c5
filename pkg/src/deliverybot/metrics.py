"""Trajectory log schema and the quantitative run report.

The CSV is the complete record: every metric recomputes from its rows
alone (plus the scenario for goal count), which a test verifies by
round-tripping the file and matching the in-process report exactly.
Floats serialize with repr() so parsing returns identical values.

heading_rmse substitutes for a steering-angle error: with differential
drive there is no steering column, so the executed heading is scored
against the path-tangent reference at the nearest path point.
"""

import csv
import math
from dataclasses import dataclass, asdict

import numpy as np

from .firmware import Mode
from .kinematics import wrap_angle

CSV_VERSION = 1

CSV_COLUMNS = [
    "t",
    "x_true", "y_true", "theta_true",
    "x_est", "y_est", "theta_est",
    "v_true", "omega_true",
    "sp_left", "sp_right",
    "pwm_left", "pwm_right",
    "mode", "lock", "battery_mv",
    "path_x", "path_y", "path_theta",
    "goal_index", "collision",
]

_INT_COLUMNS = {"mode", "lock", "battery_mv", "goal_index", "collision"}

# Samples slower than this are excluded from heading RMSE.
HEADING_V_MIN = 0.05


class MetricsError(ValueError):
    pass


def nearest_on_polyline(pts: np.ndarray, x: float, y: float):
    """Closest point on a polyline and the tangent heading there.

    Returns (px, py, heading, distance).  A single-point polyline has
    heading 0.
    """
    pts = np.asarray(pts, dtype=float)
    if len(pts) == 0:
        raise MetricsError("empty polyline")
    if len(pts) == 1:
        px, py = pts[0]
        return px, py, 0.0, math.hypot(x - px, y - py)
    a = pts[:-1]
    b = pts[1:]
    d = b - a
    seg_len2 = (d * d).sum(axis=1)
    seg_len2 = np.where(seg_len2 == 0, 1e-300, seg_len2)
    t = (((x - a[:, 0]) * d[:, 0]) + ((y - a[:, 1]) * d[:, 1])) / seg_len2
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * d
    dist2 = (proj[:, 0] - x) ** 2 + (proj[:, 1] - y) ** 2
    i = int(np.argmin(dist2))
    heading = math.atan2(d[i, 1], d[i, 0])
    return float(proj[i, 0]), float(proj[i, 1]), heading, math.sqrt(float(dist2[i]))


def obb_hits_aabb(cx, cy, theta, length, width, rect) -> bool:
    """Separating-axis overlap test between the robot's oriented box and
    an axis-aligned rectangle (touching counts as overlap)."""
    hx, hy = length / 2.0, width / 2.0
    c, s = math.cos(theta), math.sin(theta)
    corners = [(cx + c * dx - s * dy, cy + s * dx + c * dy)
               for dx in (-hx, hx) for dy in (-hy, hy)]
    xmin, ymin, xmax, ymax = rect
    # axes: world x/y, robot forward/lateral
    axes = [(1.0, 0.0), (0.0, 1.0), (c, s), (-s, c)]
    rect_corners = [(xmin, ymin), (xmin, ymax), (xmax, ymin), (xmax, ymax)]
    for ax, ay in axes:
        lo_a = min(px * ax + py * ay for px, py in corners)
        hi_a = max(px * ax + py * ay for px, py in corners)
        lo_b = min(px * ax + py * ay for px, py in rect_corners)
        hi_b = max(px * ax + py * ay for px, py in rect_corners)
        if hi_a < lo_b or hi_b < lo_a:
            return False
    return True


@dataclass(frozen=True)
class MetricsReport:
    goal_success: tuple
    path_deviation_mean: float
    path_deviation_max: float
    heading_rmse: float
    collisions: int
    failsafe_events: int
    estop_events: int
    distance: float
    elapsed: float

    def to_dict(self) -> dict:
        d = {"v": 1}
        d.update(asdict(self))
        d["goal_success"] = list(self.goal_success)
        return d


def format_csv_row(row: dict) -> str:
    return ",".join(str(row[c]) if c in _INT_COLUMNS else repr(float(row[c]))
                    for c in CSV_COLUMNS) + "\n"


def write_trajectory_csv(path, rows):
    """Versioned, byte-stable trajectory log."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# deliverybot-trajectory v{CSV_VERSION}\n")
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(format_csv_row(row))


def read_trajectory_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("# deliverybot-trajectory"):
            raise MetricsError(f"{path}: missing trajectory header")
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {}
            for c in CSV_COLUMNS:
                row[c] = int(raw[c]) if c in _INT_COLUMNS else float(raw[c])
            rows.append(row)
    return rows


def compute_metrics(rows, goal_count: int) -> MetricsReport:
    """Aggregate the run report from trajectory rows.

    Deviation and heading error use the logged nearest-path reference
    (path_x, path_y, path_theta); rows without an active path (NaN
    reference) are excluded.  Collisions and mode events count rising
    edges so a contiguous interval counts once.
    """
    if not rows:
        raise MetricsError("empty trajectory log")

    deviations = []
    heading_sq = []
    collisions = 0
    failsafe_events = 0
    estop_events = 0
    distance = 0.0
    prev = None
    max_goal_index = 0
    for row in rows:
        if not math.isnan(row["path_x"]):
            deviations.append(math.hypot(row["x_true"] - row["path_x"],
                                         row["y_true"] - row["path_y"]))
            if row["v_true"] > HEADING_V_MIN:
                heading_sq.append(wrap_angle(row["theta_true"] - row["path_theta"]) ** 2)
        if prev is not None:
            distance += math.hypot(row["x_true"] - prev["x_true"],
                                   row["y_true"] - prev["y_true"])
            if row["collision"] and not prev["collision"]:
                collisions += 1
            if row["mode"] == Mode.FAILSAFE and prev["mode"] != Mode.FAILSAFE:
                failsafe_events += 1
            if row["mode"] == Mode.ESTOPPED and prev["mode"] != Mode.ESTOPPED:
                estop_events += 1
        else:
            collisions += 1 if row["collision"] else 0
            failsafe_events += 1 if row["mode"] == Mode.FAILSAFE else 0
            estop_events += 1 if row["mode"] == Mode.ESTOPPED else 0
        max_goal_index = max(max_goal_index, row["goal_index"])
        prev = row

    return MetricsReport(
        goal_success=tuple(i < max_goal_index for i in range(goal_count)),
        path_deviation_mean=float(np.mean(deviations)) if deviations else 0.0,
        path_deviation_max=float(np.max(deviations)) if deviations else 0.0,
        heading_rmse=math.sqrt(float(np.mean(heading_sq))) if heading_sq else 0.0,
        collisions=collisions,
        failsafe_events=failsafe_events,
        estop_events=estop_events,
        distance=distance,
        elapsed=rows[-1]["t"],
    )
