"""Extended Kalman filter over (x, y, theta).

Encoder odometry drives the prediction through the exact-arc motion
model; GPS position corrects it with a Joseph-form linear update.  The
IMU yaw rate is fused before prediction as a precision-weighted blend
with the encoder yaw rate, since an instantaneous rate is not a
function of the pose state.
"""

import math
from dataclasses import dataclass

import numpy as np

from .kinematics import OMEGA_STRAIGHT_EPS, Pose2D, Twist2D, integrate_pose, wrap_angle

H_GPS = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class NoiseConfig:
    """Default noise for the 20 Hz predict / 2 Hz GPS cadence."""

    q_odom: np.ndarray = None    # 3x3 process noise per predict step
    r_gps: np.ndarray = None     # 2x2
    r_yawrate: float = 4e-4      # (rad/s)^2 IMU rate variance
    var_odom_rate: float = 4e-3  # (rad/s)^2 encoder-derived rate variance

    def __post_init__(self):
        if self.q_odom is None:
            object.__setattr__(self, "q_odom", np.diag([1e-4, 1e-4, 1e-5]))
        if self.r_gps is None:
            object.__setattr__(self, "r_gps", np.diag([1.0, 1.0]))
        for m in (self.q_odom, self.r_gps):
            if not is_psd(np.asarray(m, dtype=float)):
                raise ValueError("noise matrices must be positive semidefinite")


def is_psd(m: np.ndarray, tol: float = 1e-9) -> bool:
    if not np.allclose(m, m.T, atol=1e-12):
        return False
    return np.linalg.eigvalsh(m).min() >= -tol


def motion_jacobian(pose: Pose2D, odom: Twist2D, dt: float) -> np.ndarray:
    """Analytic Jacobian of the exact-arc motion model wrt (x, y, theta),
    branch-consistent with integrate_pose."""
    f = np.eye(3)
    if abs(odom.omega) > OMEGA_STRAIGHT_EPS:
        radius = odom.v / odom.omega
        theta_new = pose.theta + odom.omega * dt
        f[0, 2] = radius * (math.cos(theta_new) - math.cos(pose.theta))
        f[1, 2] = radius * (math.sin(theta_new) - math.sin(pose.theta))
    else:
        f[0, 2] = -odom.v * dt * math.sin(pose.theta)
        f[1, 2] = odom.v * dt * math.cos(pose.theta)
    return f


def _symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def ekf_predict(pose: Pose2D, cov: np.ndarray, odom: Twist2D, dt: float, q: np.ndarray):
    """Propagate the estimate one odometry step."""
    new_pose = integrate_pose(pose, odom, dt)
    f = motion_jacobian(pose, odom, dt)
    new_cov = _symmetrize(f @ cov @ f.T + q)
    return new_pose, new_cov


def ekf_update_gps(pose: Pose2D, cov: np.ndarray, z, r: np.ndarray):
    """Position measurement update (Joseph form).

    Returns (pose, cov, applied); a singular innovation covariance skips
    the update with applied=False.
    """
    s = H_GPS @ cov @ H_GPS.T + r
    det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
    if not math.isfinite(det) or abs(det) < 1e-18:
        return pose, cov, False
    gain = cov @ H_GPS.T @ np.linalg.inv(s)
    innovation = np.array([z[0] - pose.x, z[1] - pose.y])
    dx, dy, dth = gain @ innovation
    new_pose = Pose2D(pose.x + dx, pose.y + dy, wrap_angle(pose.theta + dth))
    ikh = np.eye(3) - gain @ H_GPS
    new_cov = _symmetrize(ikh @ cov @ ikh.T + gain @ r @ gain.T)
    return new_pose, new_cov, True


def blend_yaw_rate(omega_odom: float, var_odom: float, z_imu: float, r_imu: float) -> float:
    """Precision-weighted average of encoder and IMU yaw rates.

    r_imu -> inf ignores the IMU; r_imu -> 0 trusts it fully.
    """
    if var_odom < 0 or r_imu < 0:
        raise ValueError("variances must be >= 0")
    if math.isinf(r_imu):
        return omega_odom
    if math.isinf(var_odom):
        return z_imu
    if var_odom + r_imu == 0.0:
        return 0.5 * (omega_odom + z_imu)
    return (omega_odom * r_imu + z_imu * var_odom) / (r_imu + var_odom)


class Ekf:
    """Stateful wrapper owned by the autonomy loop."""

    def __init__(self, initial: Pose2D, noise: NoiseConfig = None,
                 initial_cov: np.ndarray = None):
        self.noise = noise if noise is not None else NoiseConfig()
        self.pose = initial
        self.cov = initial_cov if initial_cov is not None else np.diag([1e-4, 1e-4, 1e-4])
        self.gps_skipped = 0

    def predict(self, odom: Twist2D, dt: float, imu_yaw_rate: float = None):
        omega = odom.omega
        if imu_yaw_rate is not None:
            omega = blend_yaw_rate(odom.omega, self.noise.var_odom_rate,
                                   imu_yaw_rate, self.noise.r_yawrate)
        self.pose, self.cov = ekf_predict(self.pose, self.cov,
                                          Twist2D(odom.v, omega), dt, self.noise.q_odom)

    def update_gps(self, z):
        self.pose, self.cov, applied = ekf_update_gps(self.pose, self.cov, z, self.noise.r_gps)
        if not applied:
            self.gps_skipped += 1
