"""Seeded 2D plant: motor and battery dynamics, quadrature encoders,
LiDAR over axis-aligned rectangle worlds, GPS/IMU noise models, moving
agents, and a ground-truth synthetic detector.

Everything is a pure function over value types; the scenario runner owns
the single mutable copy and advances it step by step.  All randomness
comes from generators handed in by the caller.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import kernels
from .kinematics import ParameterError, Pose2D, Twist2D, integrate_pose, wrap_angle

# Lower clamp keeping ranges strictly positive.
MIN_RANGE = 1e-9


class AgentClass(Enum):
    CAR = "Car"
    VAN = "Van"
    TRUCK = "Truck"
    PEDESTRIAN = "Pedestrian"
    PERSON_SITTING = "PersonSitting"
    CYCLIST = "Cyclist"
    TRAM = "Tram"
    MISC = "Misc"


@dataclass(frozen=True)
class Agent:
    agent_id: int
    cls: AgentClass
    pose: Pose2D
    twist: Twist2D
    footprint: tuple  # (length_x, length_y) of the axis-aligned box


@dataclass(frozen=True)
class World:
    bounds: tuple                     # (xmin, ymin, xmax, ymax)
    static_obstacles: tuple = ()      # ((xmin, ymin, xmax, ymax), ...)
    agents: tuple = ()

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise ParameterError(f"degenerate world bounds {self.bounds}")
        for r in self.static_obstacles:
            if not (r[2] > r[0] and r[3] > r[1]):
                raise ParameterError(f"degenerate obstacle {r}")
            if r[0] < xmin or r[1] < ymin or r[2] > xmax or r[3] > ymax:
                raise ParameterError(f"obstacle {r} outside bounds {self.bounds}")
        for a in self.agents:
            if not (a.footprint[0] > 0 and a.footprint[1] > 0):
                raise ParameterError(f"agent {a.agent_id} footprint must have positive area")

    def obstacle_rects(self, include_agents: bool = True) -> np.ndarray:
        """All occupancy rectangles as an (N, 4) array for raycasting."""
        rects = list(self.static_obstacles)
        if include_agents:
            for a in self.agents:
                hx, hy = a.footprint[0] / 2, a.footprint[1] / 2
                rects.append((a.pose.x - hx, a.pose.y - hy, a.pose.x + hx, a.pose.y + hy))
        return np.array(rects, dtype=np.float64).reshape(-1, 4)


@dataclass(frozen=True)
class MotorState:
    omega: float = 0.0
    pwm: float = 0.0
    warn_clamped: bool = False


def motor_step(s: MotorState, pwm_cmd: float, dt: float, tau_m: float, omega_max: float) -> MotorState:
    """First-order lag toward pwm * omega_max with time constant tau_m."""
    if not (dt > 0 and tau_m > 0):
        raise ParameterError(f"dt and tau_m must be > 0, got {dt}, {tau_m}")
    clamped = pwm_cmd < -1.0 or pwm_cmd > 1.0
    pwm = max(-1.0, min(1.0, pwm_cmd))
    alpha = 1.0 - math.exp(-dt / tau_m)
    omega = s.omega + (pwm * omega_max - s.omega) * alpha
    return MotorState(omega=omega, pwm=pwm, warn_clamped=clamped)


@dataclass(frozen=True)
class EncoderState:
    ticks: int = 0
    residual: float = 0.0  # rad not yet emitted as a whole tick


def encoder_step(e: EncoderState, omega: float, dt: float, ticks_per_rev: int) -> EncoderState:
    """Accumulate wheel angle, emitting whole ticks; total angle is
    conserved as ticks * tick_angle + residual."""
    if not dt > 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    tick_angle = 2.0 * math.pi / ticks_per_rev
    total = e.residual + omega * dt
    n = math.floor(total / tick_angle)
    return EncoderState(ticks=e.ticks + n, residual=total - n * tick_angle)


@dataclass(frozen=True)
class LidarParams:
    n_beams: int = 360
    fov: float = 2.0 * math.pi
    max_range: float = 8.0
    sigma_r: float = 0.01

    def __post_init__(self):
        if self.n_beams < 1 or not (0 < self.fov <= 2 * math.pi) or self.max_range <= 0 or self.sigma_r < 0:
            raise ParameterError(f"invalid lidar params {self}")


def beam_angles(theta: float, p: LidarParams) -> np.ndarray:
    """World-frame beam angles: evenly spread across the fov, centered
    on the heading."""
    if p.n_beams == 1:
        return np.array([theta])
    k = np.arange(p.n_beams, dtype=np.float64)
    return theta + p.fov * (k / (p.n_beams - 1) - 0.5)


def lidar_scan(w: World, pose: Pose2D, p: LidarParams, rng: np.random.Generator) -> np.ndarray:
    """Ranges per beam; exactly max_range means no hit (sentinel)."""
    xmin, ymin, xmax, ymax = w.bounds
    if not (xmin <= pose.x <= xmax and ymin <= pose.y <= ymax):
        raise ParameterError(f"lidar pose {pose} outside world bounds")
    angles = beam_angles(pose.theta, p)
    ranges = kernels.raycast(
        pose.x, pose.y, np.cos(angles), np.sin(angles),
        w.obstacle_rects(), p.max_range,
    )
    hit = ranges < p.max_range
    if p.sigma_r > 0 and hit.any():
        noise = rng.normal(0.0, p.sigma_r, size=ranges.shape)
        ranges = np.where(hit, ranges + noise, ranges)
    return np.clip(ranges, MIN_RANGE, p.max_range)


def sample_gps_imu(pose: Pose2D, twist: Twist2D, noise: tuple, rng: np.random.Generator):
    """(gps_xy, yaw_rate) with Gaussian noise (sigma_xy, sigma_yaw_rate)."""
    sigma_xy, sigma_yaw = noise
    if sigma_xy < 0 or sigma_yaw < 0:
        raise ParameterError("noise sigmas must be >= 0")
    gx = pose.x + (rng.normal(0.0, sigma_xy) if sigma_xy > 0 else 0.0)
    gy = pose.y + (rng.normal(0.0, sigma_xy) if sigma_xy > 0 else 0.0)
    yaw_rate = twist.omega + (rng.normal(0.0, sigma_yaw) if sigma_yaw > 0 else 0.0)
    return (gx, gy), yaw_rate


@dataclass(frozen=True)
class BatteryState:
    soc: float = 1.0
    voltage: float = 8.4
    capacity: float = 2.0             # A*h
    internal_resistance: float = 0.05  # ohm
    v_full: float = 8.4
    v_empty: float = 6.0


def battery_step(b: BatteryState, current: float, dt: float) -> BatteryState:
    """Linear open-circuit discharge with an ohmic sag under load."""
    if not dt > 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    soc = min(1.0, max(0.0, b.soc - current * dt / (3600.0 * b.capacity)))
    voltage = b.v_full - (b.v_full - b.v_empty) * (1.0 - soc) - current * b.internal_resistance
    return replace(b, soc=soc, voltage=voltage)


@dataclass(frozen=True)
class Detection:
    cls: AgentClass
    center: tuple       # (x, y) world frame
    footprint: tuple    # (extent_x, extent_y)
    confidence: float


def detect(w: World, pose: Pose2D, fov: float, max_range: float,
           noise_xy: float, dropout: float, rng: np.random.Generator) -> list:
    """Ground-truth detector: agents inside the sensing wedge, center
    jittered, independently dropped with the dropout probability."""
    if not (0 <= dropout <= 1) or noise_xy < 0:
        raise ParameterError("invalid detector parameters")
    out = []
    for a in w.agents:
        dx = a.pose.x - pose.x
        dy = a.pose.y - pose.y
        dist = math.hypot(dx, dy)
        if dist > max_range:
            continue
        bearing = wrap_angle(math.atan2(dy, dx) - pose.theta)
        if abs(bearing) > fov / 2:
            continue
        if rng.random() < dropout:
            continue
        cx = a.pose.x + (rng.normal(0.0, noise_xy) if noise_xy > 0 else 0.0)
        cy = a.pose.y + (rng.normal(0.0, noise_xy) if noise_xy > 0 else 0.0)
        out.append(Detection(cls=a.cls, center=(cx, cy), footprint=a.footprint,
                             confidence=1.0 - dropout))
    return out


def world_step(w: World, dt: float) -> World:
    """Advance agents along their twists, reflecting at the bounds."""
    if not dt > 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    if not w.agents:
        return w
    xmin, ymin, xmax, ymax = w.bounds
    moved = []
    for a in w.agents:
        if a.twist.v == 0.0 and a.twist.omega == 0.0:
            moved.append(a)
            continue
        p = integrate_pose(a.pose, a.twist, dt)
        hx, hy = a.footprint[0] / 2, a.footprint[1] / 2
        x, y, theta = p.x, p.y, p.theta
        if x < xmin + hx:
            x = xmin + hx
            theta = wrap_angle(math.pi - theta)
        elif x > xmax - hx:
            x = xmax - hx
            theta = wrap_angle(math.pi - theta)
        if y < ymin + hy:
            y = ymin + hy
            theta = wrap_angle(-theta)
        elif y > ymax - hy:
            y = ymax - hy
            theta = wrap_angle(-theta)
        moved.append(replace(a, pose=Pose2D(x, y, theta)))
    return replace(w, agents=tuple(moved))
