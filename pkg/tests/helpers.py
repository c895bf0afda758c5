"""Shared simulation harnesses used by unit and acceptance tests."""

import math

from deliverybot.estimation import Ekf, NoiseConfig
from deliverybot.kinematics import (
    Pose2D,
    RobotParams,
    Twist2D,
    WheelSpeeds,
    integrate_pose,
    twist_from_wheels,
    wheels_from_twist,
)
from deliverybot.plant import EncoderState, encoder_step, sample_gps_imu
from deliverybot.rng import stream


def figure_eight_run(seed: int, duration: float = 60.0, skid_gain: float = 0.08,
                     sigma_wheel: float = 0.05):
    """Drive a figure-eight and compare EKF vs dead-reckoning error.

    Encoders report the commanded wheel rotation; the ground contact
    skids (heading scale error plus white slip), which is what the GPS
    and IMU corrections have to absorb.  Returns (ekf_rmse, dr_rmse) of
    position over the run.
    """
    params = RobotParams()
    dt = 0.05  # EKF cadence
    gps_every = 10  # 2 Hz
    g_slip = stream(seed, "wheel_slip")
    g_sens = stream(seed, "gps_imu")
    truth = Pose2D()
    dr = Pose2D()
    ekf = Ekf(Pose2D(), NoiseConfig())
    enc_l = EncoderState()
    enc_r = EncoderState()
    tick_angle = 2 * math.pi / params.ticks_per_wheel_rev
    half_period = 4 * math.pi  # one full circle at |omega| = 0.5

    sq_ekf = 0.0
    sq_dr = 0.0
    n = int(round(duration / dt))
    for i in range(n):
        t = i * dt
        omega_cmd = 0.5 if int(t // half_period) % 2 == 0 else -0.5
        w = wheels_from_twist(Twist2D(0.6, omega_cmd), params)

        # odometry: quantized tick deltas over the window
        new_l = encoder_step(enc_l, w.left, dt, params.ticks_per_wheel_rev)
        new_r = encoder_step(enc_r, w.right, dt, params.ticks_per_wheel_rev)
        rate_l = (new_l.ticks - enc_l.ticks) * tick_angle / dt
        rate_r = (new_r.ticks - enc_r.ticks) * tick_angle / dt
        enc_l, enc_r = new_l, new_r
        odom = twist_from_wheels(WheelSpeeds(rate_l, rate_r), params)

        # ground truth: wheel slip plus skid-steer heading scale error
        slip_l = float(g_slip.normal(0.0, sigma_wheel))
        slip_r = float(g_slip.normal(0.0, sigma_wheel))
        tw = twist_from_wheels(WheelSpeeds(w.left + slip_l, w.right + slip_r), params)
        true_twist = Twist2D(tw.v, tw.omega * (1.0 + skid_gain))
        truth = integrate_pose(truth, true_twist, dt)

        (gx, gy), yaw_rate = sample_gps_imu(truth, true_twist, (1.0, 0.02), g_sens)
        dr = integrate_pose(dr, odom, dt)
        ekf.predict(odom, dt, imu_yaw_rate=yaw_rate)
        if i % gps_every == 0:
            ekf.update_gps((gx, gy))

        sq_ekf += (ekf.pose.x - truth.x) ** 2 + (ekf.pose.y - truth.y) ** 2
        sq_dr += (dr.x - truth.x) ** 2 + (dr.y - truth.y) ** 2

    return math.sqrt(sq_ekf / n), math.sqrt(sq_dr / n)
