"""Differential-drive kinematics and drivetrain sizing.

The 4WD skid-steer platform is modeled as an ideal two-track
differential drive: each side's wheel pair turns at one speed, and an
effective track width relates the speed difference to body rotation.
Pose integration uses the exact circular-arc solution so composing many
small steps equals one large step for a constant twist.
"""

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi

# Angular velocities below this are integrated as straight-line motion.
OMEGA_STRAIGHT_EPS = 1e-9


class ParameterError(ValueError):
    """Invalid physical parameter or operation input."""


class WheelSaturationError(ValueError):
    """Requested twist exceeds wheel speed limits.

    Carries the clamped speeds so callers can degrade gracefully.
    """

    def __init__(self, requested, clamped):
        super().__init__(f"wheel speeds {requested} exceed limit, clamped to {clamped}")
        self.requested = requested
        self.clamped = clamped


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    r = math.remainder(theta, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


@dataclass(frozen=True)
class RobotParams:
    """Physical constants of the drive platform."""

    mass: float = 15.0              # kg
    wheel_radius: float = 0.09      # m (18 cm wheel diameter)
    track_width: float = 0.45       # m, effective contact-line spacing
    wheel_count: int = 4
    mu: float = 0.6                 # static friction, rubber on concrete
    g: float = 9.81                 # m/s^2
    v_max: float = 3.0              # m/s
    wheel_omega_max: float = 36.65  # rad/s (~350 rpm no-load)
    ticks_per_wheel_rev: int = 374

    def __post_init__(self):
        numeric = {
            "mass": self.mass,
            "wheel_radius": self.wheel_radius,
            "track_width": self.track_width,
            "mu": self.mu,
            "g": self.g,
            "v_max": self.v_max,
            "wheel_omega_max": self.wheel_omega_max,
            "ticks_per_wheel_rev": self.ticks_per_wheel_rev,
        }
        for name, value in numeric.items():
            if not value > 0:
                raise ParameterError(f"{name} must be > 0, got {value}")
        if self.wheel_count < 2 or self.wheel_count % 2 != 0:
            raise ParameterError(f"wheel_count must be even and >= 2, got {self.wheel_count}")
        if self.v_max / self.wheel_radius > self.wheel_omega_max * (1 + 1e-12):
            raise ParameterError(
                f"v_max {self.v_max} unreachable: needs {self.v_max / self.wheel_radius:.3f} rad/s "
                f"but wheel_omega_max is {self.wheel_omega_max}"
            )


@dataclass(frozen=True)
class Pose2D:
    """Planar pose; theta normalized to (-pi, pi]."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))


@dataclass(frozen=True)
class Twist2D:
    """Body velocity: forward v (m/s) and CCW-positive omega (rad/s)."""

    v: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise ParameterError(f"twist must be finite, got ({self.v}, {self.omega})")


@dataclass(frozen=True)
class WheelSpeeds:
    """Per-side wheel angular speeds (rad/s); each side's pair is locked."""

    left: float = 0.0
    right: float = 0.0


@dataclass(frozen=True)
class SizingReport:
    """Actuator requirements for a target cruise speed."""

    omega_required: float   # rad/s
    rpm_required: float     # rev/min
    weight: float           # N
    wheel_load: float       # N per wheel
    traction_force: float   # N per wheel
    startup_torque: float   # N*m per motor


def actuator_sizing(params: RobotParams, v_target: float) -> SizingReport:
    """Size the drive motors for a target linear speed.

    Chains the no-load speed requirement (omega = v/r, converted to rpm)
    with the breakaway-torque requirement from the per-wheel normal load
    and static friction.
    """
    if not v_target > 0:
        raise ParameterError(f"v_target must be > 0, got {v_target}")
    omega = v_target / params.wheel_radius
    rpm = omega * 60.0 / TWO_PI
    weight = params.mass * params.g
    wheel_load = weight / params.wheel_count
    traction = params.mu * wheel_load
    torque = traction * params.wheel_radius
    return SizingReport(
        omega_required=omega,
        rpm_required=rpm,
        weight=weight,
        wheel_load=wheel_load,
        traction_force=traction,
        startup_torque=torque,
    )


def wheels_from_twist(t: Twist2D, p: RobotParams) -> WheelSpeeds:
    """Inverse kinematics: body twist to per-side wheel speeds.

    Raises WheelSaturationError (carrying the clamped speeds) if either
    side exceeds the wheel speed limit.
    """
    half = 0.5 * p.track_width
    left = (t.v - t.omega * half) / p.wheel_radius
    right = (t.v + t.omega * half) / p.wheel_radius
    limit = p.wheel_omega_max
    if abs(left) > limit or abs(right) > limit:
        clamped = WheelSpeeds(
            left=max(-limit, min(limit, left)),
            right=max(-limit, min(limit, right)),
        )
        raise WheelSaturationError(WheelSpeeds(left, right), clamped)
    return WheelSpeeds(left=left, right=right)


def twist_from_wheels(w: WheelSpeeds, p: RobotParams) -> Twist2D:
    """Forward kinematics: per-side wheel speeds to body twist."""
    v = p.wheel_radius * (w.left + w.right) / 2.0
    omega = p.wheel_radius * (w.right - w.left) / p.track_width
    return Twist2D(v=v, omega=omega)


def integrate_pose(pose: Pose2D, t: Twist2D, dt: float) -> Pose2D:
    """Advance a pose along a constant twist for dt seconds.

    Uses the exact instantaneous-center-of-curvature arc when |omega| is
    meaningful, otherwise the straight-line limit, so n steps of dt
    compose exactly to one step of n*dt.
    """
    if not dt > 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    if abs(t.omega) > OMEGA_STRAIGHT_EPS:
        radius = t.v / t.omega
        theta_new = pose.theta + t.omega * dt
        x = pose.x + radius * (math.sin(theta_new) - math.sin(pose.theta))
        y = pose.y - radius * (math.cos(theta_new) - math.cos(pose.theta))
        return Pose2D(x=x, y=y, theta=wrap_angle(theta_new))
    x = pose.x + t.v * math.cos(pose.theta) * dt
    y = pose.y + t.v * math.sin(pose.theta) * dt
    return Pose2D(x=x, y=y, theta=wrap_angle(pose.theta + t.omega * dt))
