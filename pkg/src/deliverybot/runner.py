"""Fixed-step scenario execution.

One master loop advances everything at sim_dt; tasks fire on integer
tick multiples in a fixed order within each tick:

    1. plant (agents, motors, encoders, battery, true pose)
    2. downlink delivery -> firmware frames
    3. firmware control tick (PWM, status frames)
    4. uplink delivery -> estimation (EKF predict per status, GPS fix)
    5. lidar scan -> occupancy grid -> costmap
    6. detector -> obstacle tracks
    7. autonomy (operator commands, goals, A*, MPPI, CmdVel frames)
    8. telemetry row + broadcast

Identical (scenario, seed, command log) reproduce identical output
bytes: all randomness flows from named Philox streams, and operator
commands apply only at autonomy tick boundaries, where they are also
logged for replay.
"""

import json
import math
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import firmware as fw
from . import kinematics as kin
from .estimation import Ekf
from .gateway import TelemetryPublisher
from .link import Channel, FrameDecoder, FrameKind, decode_status, encode_cmd_vel, encode_frame, Frame
from .mapping import OccupancyGrid, grid_snapshot, inflate, update_grid
from .metrics import (
    CSV_COLUMNS,
    CSV_VERSION,
    MetricsReport,
    compute_metrics,
    format_csv_row,
    nearest_on_polyline,
    obb_hits_aabb,
)
from .plant import (
    EncoderState,
    MotorState,
    battery_step,
    detect,
    encoder_step,
    lidar_scan,
    motor_step,
    sample_gps_imu,
    world_step,
)
from .planning import (
    InvalidEndpointError,
    NoPathError,
    astar,
    empty_nominal,
    mppi_plan,
    predict_tracks,
)
from .rng import streams
from .scenario import Scenario

TRACK_GATE = 0.8    # m association gate
TRACK_STALE = 1.0   # s without a detection drops the track

# The controller only trusts its estimate: a goal counts as reached for
# control purposes when the estimated distance plus 2.5 estimated
# position sigmas fits inside the goal radius (with a floor so the
# condition stays reachable).  The success metric stays on the true
# pose at the full radius.
GOAL_SIGMA_GATE = 2.5
GOAL_REACH_FLOOR = 0.08

MODE_NAMES = {m: m.name.title().replace("_", "") for m in fw.Mode}
LOCK_NAMES = {fw.Lock.LOCKED: "Locked", fw.Lock.UNLOCKED: "Unlocked"}

COMMAND_FRAME_KINDS = {
    "ESTOP": FrameKind.ESTOP,
    "RESUME": FrameKind.RESUME,
    "LOCK": FrameKind.LOCK,
    "UNLOCK": FrameKind.UNLOCK,
}


@dataclass
class RunOutputs:
    metrics: MetricsReport
    rows: list
    command_log: list        # [(t_applied, {"cmd": ...}), ...]
    telemetry_lines: list
    completed: bool


class Tracker:
    """Nearest-neighbor association feeding constant-velocity tracks."""

    def __init__(self):
        self.history = {}   # id -> [(t, (x, y), (ex, ey)), ...] (last 2)
        self.last_seen = {}
        self._next_id = 0

    def observe(self, t: float, detections):
        for det in detections:
            cx, cy = det.center
            best = None
            best_d = TRACK_GATE
            for tid in sorted(self.history):
                lx, ly = self.history[tid][-1][1]
                d = math.hypot(cx - lx, cy - ly)
                if d < best_d:
                    best, best_d = tid, d
            if best is None:
                best = self._next_id
                self._next_id += 1
                self.history[best] = []
            self.history[best] = (self.history[best] + [(t, (cx, cy), det.footprint)])[-2:]
            self.last_seen[best] = t
        for tid in [k for k, seen in self.last_seen.items() if t - seen > TRACK_STALE]:
            del self.history[tid]
            del self.last_seen[tid]

    def tracks(self):
        return predict_tracks(self.history)


class Runner:
    def __init__(self, scenario: Scenario, gateway=None, commands=(),
                 telemetry_path=None, command_log_path=None, traj_path=None,
                 realtime=False):
        sc = scenario
        self.sc = sc
        self.gateway = gateway
        self.realtime = realtime
        self.rng = streams(sc.seed)
        self.n_steps = int(round(sc.duration / sc.sim_dt))

        self.ctrl_div = sc.divider(sc.firmware.t_ctrl, "control")
        self.status_tick_div = self.ctrl_div * sc.firmware.n_status
        self.autonomy_div = sc.divider(1.0 / sc.rates.autonomy_hz, "rates.autonomy_hz")
        self.telem_div = sc.divider(1.0 / sc.rates.telemetry_hz, "rates.telemetry_hz")
        self.lidar_div = sc.divider(1.0 / sc.rates.lidar_hz, "rates.lidar_hz")
        self.gps_div = sc.divider(1.0 / sc.rates.gps_hz, "rates.gps_hz")
        self.snap_div = sc.divider(sc.rates.map_snapshot_period, "rates.map_snapshot_period")

        # plant
        self.world = sc.world
        self.true_pose = sc.robot_start
        self.motor_l = MotorState()
        self.motor_r = MotorState()
        self.enc_l = EncoderState()
        self.enc_r = EncoderState()
        self.battery = sc.battery.state
        self.tick_angle = 2 * math.pi / sc.robot.ticks_per_wheel_rev
        self.ground_twist = kin.Twist2D()

        # link
        self.down = Channel(sc.faults.channel, self.rng["channel_down"])
        self.up = Channel(sc.faults.channel, self.rng["channel_up"])
        self.fw_dec = FrameDecoder()
        self.hl_dec = FrameDecoder()

        # firmware
        self.fstate = fw.FirmwareState()
        self.pwm_l = self.pwm_r = 0.0
        self.rate_window = deque([(0, 0)], maxlen=sc.firmware.n_status + 1)

        # autonomy
        self.ekf = Ekf(sc.robot_start, sc.ekf_noise)
        self.grid = OccupancyGrid.for_bounds(
            sc.world.bounds, resolution=sc.map.resolution, l_occ=sc.map.l_occ,
            l_free=sc.map.l_free, l_max=sc.map.l_max, occ_threshold=sc.map.occ_threshold)
        self.costmap = inflate(self.grid, sc.map.inflation_radius)
        self.tracker = Tracker()
        self.nominal = empty_nominal(sc.mppi)
        self.path = None
        self.path_cells = None
        self.goals = list(sc.goals)
        self.goals_reached = 0
        self.goal_true_entered = False
        self.cmd_seq = 0
        self.last_status_t = 0.0
        self.last_status_ticks = (0, 0)
        self.latest_gps = (sc.robot_start.x, sc.robot_start.y)
        self.latest_yaw_rate = 0.0
        self.latest_detections = []
        self.last_diag = None
        self.mapping_skipped = 0

        # outputs
        self.rows = []
        self.publisher = TelemetryPublisher()
        self.telemetry_lines = []
        self.command_log = []
        self.scripted = sorted(
            [(float(t), dict(c)) for t, c in list(sc.script) + list(commands)],
            key=lambda e: e[0])
        self.script_idx = 0
        self.telemetry_path = telemetry_path
        self.command_log_path = command_log_path
        self.traj_path = traj_path
        self._command_log_file = None
        self._traj_file = None
        self.completed = False
        self._published_path = None

    # -- helpers -------------------------------------------------------

    def _nearest_path_ref(self, x, y):
        if self.path is None or len(self.path.waypoints) == 0:
            return math.nan, math.nan, math.nan
        px, py, heading, _ = nearest_on_polyline(self.path.waypoints, x, y)
        return px, py, heading

    def _robot_collides(self) -> bool:
        rects = [tuple(r) for r in self.world.static_obstacles]
        for a in self.world.agents:
            hx, hy = a.footprint[0] / 2, a.footprint[1] / 2
            rects.append((a.pose.x - hx, a.pose.y - hy, a.pose.x + hx, a.pose.y + hy))
        p = self.true_pose
        return any(obb_hits_aabb(p.x, p.y, p.theta, self.sc.robot_footprint[0],
                                 self.sc.robot_footprint[1], r) for r in rects)

    def _apply_command(self, cmd: dict, t_now: float):
        """Translate one operator command into frames/goal edits; runs
        only at autonomy boundaries so replays are deterministic."""
        kind = cmd.get("cmd")
        self.command_log.append((t_now, dict(cmd)))
        if self._command_log_file is not None:
            self._command_log_file.write(json.dumps([t_now, cmd]) + "\n")
            self._command_log_file.flush()
        if kind in COMMAND_FRAME_KINDS:
            wire = encode_frame(Frame(COMMAND_FRAME_KINDS[kind], self.cmd_seq))
            self.cmd_seq = (self.cmd_seq + 1) & 0xFFFF
            self.down.send(wire, t_now)
        elif kind == "GOAL":
            self.goals = [(float(cmd["x"]), float(cmd["y"]))]
            self.goal_true_entered = False
            self.path = None
            self.path_cells = None

    # -- per-tick phases -------------------------------------------------

    def _plant_step(self, t_now):
        sc = self.sc
        dt = sc.sim_dt
        if self.world.agents:
            self.world = world_step(self.world, dt)
        self.motor_l = motor_step(self.motor_l, self.pwm_l, dt, sc.motor_tau, sc.robot.wheel_omega_max)
        self.motor_r = motor_step(self.motor_r, self.pwm_r, dt, sc.motor_tau, sc.robot.wheel_omega_max)
        self.enc_l = encoder_step(self.enc_l, self.motor_l.omega, dt, sc.robot.ticks_per_wheel_rev)
        self.enc_r = encoder_step(self.enc_r, self.motor_r.omega, dt, sc.robot.ticks_per_wheel_rev)
        if sc.slip.sigma_wheel > 0:
            slip_l = float(self.rng["wheel_slip"].normal(0.0, sc.slip.sigma_wheel))
            slip_r = float(self.rng["wheel_slip"].normal(0.0, sc.slip.sigma_wheel))
        else:
            slip_l = slip_r = 0.0
        gt = kin.twist_from_wheels(
            kin.WheelSpeeds(self.motor_l.omega + slip_l, self.motor_r.omega + slip_r), sc.robot)
        self.ground_twist = kin.Twist2D(gt.v, gt.omega * (1.0 + sc.slip.skid_gain))
        self.true_pose = kin.integrate_pose(self.true_pose, self.ground_twist, dt)
        current = sc.battery.base_current + sc.battery.motor_current * (abs(self.pwm_l) + abs(self.pwm_r)) / 2
        self.battery = battery_step(self.battery, current, dt)
        measured_v = self.battery.voltage
        for t0, t1, volts in sc.battery.overrides:
            if t0 <= t_now < t1:
                measured_v = volts
        return measured_v

    def _firmware_tick(self, t_now, measured_v):
        sc = self.sc
        self.rate_window.append((self.enc_l.ticks, self.enc_r.ticks))
        span = len(self.rate_window) - 1
        dt_win = span * sc.firmware.t_ctrl
        rate_l = (self.rate_window[-1][0] - self.rate_window[0][0]) * self.tick_angle / dt_win
        rate_r = (self.rate_window[-1][1] - self.rate_window[0][1]) * self.tick_angle / dt_win
        self.pwm_l, self.pwm_r, self.fstate, status = fw.control_tick(
            self.fstate, kin.WheelSpeeds(rate_l, rate_r),
            (self.enc_l.ticks, self.enc_r.ticks), measured_v, t_now, sc.firmware)
        if status is not None:
            self.up.send(status, t_now)

    def _estimation(self, t_now, tick):
        sc = self.sc
        if tick % self.status_tick_div == 0:
            self.latest_gps, self.latest_yaw_rate = sample_gps_imu(
                self.true_pose, self.ground_twist,
                (sc.sensor_noise.gps_sigma_xy, sc.sensor_noise.imu_sigma_yaw_rate),
                self.rng["gps_imu"])
        for frame in self.hl_dec.feed(self.up.step(t_now)):
            if frame.kind != FrameKind.STATUS:
                continue
            st = decode_status(frame.payload)
            dt_status = t_now - self.last_status_t
            if dt_status <= 0:
                continue
            rate_l = (st["left_ticks"] - self.last_status_ticks[0]) * self.tick_angle / dt_status
            rate_r = (st["right_ticks"] - self.last_status_ticks[1]) * self.tick_angle / dt_status
            self.last_status_t = t_now
            self.last_status_ticks = (st["left_ticks"], st["right_ticks"])
            odom = kin.twist_from_wheels(kin.WheelSpeeds(rate_l, rate_r), sc.robot)
            self.ekf.predict(odom, dt_status, imu_yaw_rate=self.latest_yaw_rate)
        if tick % self.gps_div == 0:
            self.ekf.update_gps(self.latest_gps)

    def _perception(self, t_now):
        sc = self.sc
        ranges = lidar_scan(self.world, self.true_pose, sc.lidar, self.rng["lidar"])
        if self.grid.contains_cell(*self.grid.cell_of(self.ekf.pose.x, self.ekf.pose.y)):
            self.grid = update_grid(self.grid, self.ekf.pose, ranges, sc.lidar)
            self.costmap = inflate(self.grid, sc.map.inflation_radius)
        else:
            self.mapping_skipped += 1
        self.latest_detections = detect(
            self.world, self.true_pose, sc.detector.fov, sc.detector.max_range,
            sc.detector.noise_xy, sc.detector.dropout, self.rng["detector"])
        self.tracker.observe(t_now, self.latest_detections)

    def _autonomy(self, t_now) -> bool:
        """Returns True when the mission is complete (stop the loop)."""
        sc = self.sc
        while self.script_idx < len(self.scripted) and self.scripted[self.script_idx][0] <= t_now:
            self._apply_command(self.scripted[self.script_idx][1], t_now)
            self.script_idx += 1
        if self.gateway is not None:
            for cmd in self.gateway.pop_commands():
                self._apply_command(cmd.to_json(), t_now)

        if self.goals:
            gx, gy = self.goals[0]
            if math.hypot(self.true_pose.x - gx, self.true_pose.y - gy) <= sc.planner.goal_radius:
                self.goal_true_entered = True
            sigma_pos = math.sqrt(max(self.ekf.cov[0, 0], self.ekf.cov[1, 1], 0.0))
            reach = max(sc.planner.goal_radius - GOAL_SIGMA_GATE * sigma_pos, GOAL_REACH_FLOOR)
            if math.hypot(self.ekf.pose.x - gx, self.ekf.pose.y - gy) <= reach:
                self.goals.pop(0)
                if self.goal_true_entered:
                    self.goals_reached += 1
                self.goal_true_entered = False
                self.path = None
                self.path_cells = None
        if not self.goals and sc.stop_on_success:
            return True

        if self.goals:
            need_replan = self.path is None
            if self.path is not None:
                _, _, _, stray = nearest_on_polyline(self.path.waypoints,
                                                     self.ekf.pose.x, self.ekf.pose.y)
                if stray > sc.planner.replan_stray:
                    need_replan = True
                elif self.path_cells is not None and self.costmap.lethal_mask()[self.path_cells].any():
                    need_replan = True
            if need_replan:
                try:
                    self.path = astar(self.costmap, (self.ekf.pose.x, self.ekf.pose.y),
                                      self.goals[0], alpha=sc.planner.alpha)
                    wp = self.path.waypoints
                    ix = np.floor((wp[:, 0] - self.costmap.origin[0]) / self.costmap.resolution).astype(int)
                    iy = np.floor((wp[:, 1] - self.costmap.origin[1]) / self.costmap.resolution).astype(int)
                    self.path_cells = (ix, iy)
                    self.nominal = empty_nominal(sc.mppi)
                except (NoPathError, InvalidEndpointError):
                    self.path = None
                    self.path_cells = None

        if self.path is not None:
            cmd_twist, self.nominal, self.last_diag = mppi_plan(
                self.ekf.pose, self.nominal, self.path, self.costmap,
                self.tracker.tracks(), sc.mppi, self.rng["mppi"])
        else:
            cmd_twist = kin.Twist2D()
        try:
            wheels = kin.wheels_from_twist(cmd_twist, sc.robot)
        except kin.WheelSaturationError as exc:
            wheels = exc.clamped
        self.down.send(encode_cmd_vel(self.cmd_seq, wheels.left, wheels.right), t_now)
        self.cmd_seq = (self.cmd_seq + 1) & 0xFFFF
        return False

    def _emit_telemetry(self, t_now, tick):
        collision = self._robot_collides()
        px, py, pth = self._nearest_path_ref(self.true_pose.x, self.true_pose.y)
        row = {
            "t": t_now,
            "x_true": self.true_pose.x, "y_true": self.true_pose.y,
            "theta_true": self.true_pose.theta,
            "x_est": self.ekf.pose.x, "y_est": self.ekf.pose.y,
            "theta_est": self.ekf.pose.theta,
            "v_true": self.ground_twist.v, "omega_true": self.ground_twist.omega,
            "sp_left": self.fstate.setpoints.left, "sp_right": self.fstate.setpoints.right,
            "pwm_left": self.pwm_l, "pwm_right": self.pwm_r,
            "mode": int(self.fstate.mode), "lock": int(self.fstate.lock),
            "battery_mv": max(0, min(0xFFFF, round(self.battery.voltage * 1000))),
            "path_x": px, "path_y": py, "path_theta": pth,
            "goal_index": self.goals_reached, "collision": int(collision),
        }
        self.rows.append(row)
        if self._traj_file is not None:
            self._traj_file.write(format_csv_row(row))
            self._traj_file.flush()
        record = {
            "v": 1,
            "t": round(t_now, 6),
            "mode": MODE_NAMES[self.fstate.mode],
            "lock": LOCK_NAMES[self.fstate.lock],
            "battery_mv": row["battery_mv"],
            "pose_est": {"x": round(row["x_est"], 4), "y": round(row["y_est"], 4),
                         "theta": round(row["theta_est"], 4)},
            "pose_true": {"x": round(row["x_true"], 4), "y": round(row["y_true"], 4),
                          "theta": round(row["theta_true"], 4)},
            "twist": {"v": round(row["v_true"], 4), "omega": round(row["omega_true"], 4)},
            "setpoints": [round(row["sp_left"], 3), round(row["sp_right"], 3)],
            "pwm": [round(self.pwm_l, 4), round(self.pwm_r, 4)],
            "goal": list(self.goals[0]) if self.goals else None,
            "goals_reached": self.goals_reached,
            "planner": None if self.last_diag is None else {
                "min_cost": round(self.last_diag.min_cost, 3),
                "mean_cost": round(self.last_diag.mean_cost, 3),
                "ess": round(self.last_diag.effective_samples, 2),
                "safe_stop": self.last_diag.safe_stop,
            },
            "detections": [
                {"cls": d.cls.value,
                 "center": [round(d.center[0], 3), round(d.center[1], 3)],
                 "footprint": list(d.footprint),
                 "confidence": round(d.confidence, 3)}
                for d in self.latest_detections
            ],
            "map": grid_snapshot(self.grid) if tick % self.snap_div == 0 else None,
        }
        # path waypoints travel only when the plan changed (delta style,
        # like map snapshots); null means "unchanged since last sent"
        if self.path is not self._published_path:
            self._published_path = self.path
            if self.path is None:
                record["path"] = []
            else:
                wp = self.path.waypoints
                pts = list(wp[::3]) + ([wp[-1]] if len(wp) % 3 != 1 else [])
                record["path"] = [[round(float(x), 3), round(float(y), 3)] for x, y in pts]
        else:
            record["path"] = None
        line = self.publisher.encode(record)
        self.telemetry_lines.append(line)
        if self._telemetry_file:
            self._telemetry_file.write(line)
            self._telemetry_file.flush()
        if self.gateway is not None:
            self.gateway.publish(line)

    # -- main loop -------------------------------------------------------

    def run(self) -> RunOutputs:
        self._telemetry_file = (open(self.telemetry_path, "a", encoding="utf-8")
                                if self.telemetry_path else None)
        self._command_log_file = (open(self.command_log_path, "w", encoding="utf-8")
                                  if self.command_log_path else None)
        if self.traj_path:
            self._traj_file = open(self.traj_path, "w", newline="", encoding="utf-8")
            self._traj_file.write(f"# deliverybot-trajectory v{CSV_VERSION}\n")
            self._traj_file.write(",".join(CSV_COLUMNS) + "\n")
        wall_start = time.monotonic()
        try:
            for i in range(1, self.n_steps + 1):
                t_now = i * self.sc.sim_dt
                measured_v = self._plant_step(t_now)
                for frame in self.fw_dec.feed(self.down.step(t_now)):
                    self.fstate = fw.on_frame(self.fstate, frame, t_now)
                if i % self.ctrl_div == 0:
                    self._firmware_tick(t_now, measured_v)
                self._estimation(t_now, i)
                if i % self.lidar_div == 0:
                    self._perception(t_now)
                if i % self.autonomy_div == 0:
                    if self._autonomy(t_now):
                        self._emit_telemetry(t_now, i)
                        self.completed = True
                        break
                if i % self.telem_div == 0:
                    self._emit_telemetry(t_now, i)
                if self.realtime:
                    lag = t_now - (time.monotonic() - wall_start)
                    if lag > 0:
                        time.sleep(lag)
            else:
                self.completed = True
        finally:
            if self._telemetry_file:
                self._telemetry_file.close()
                self._telemetry_file = None
            if self._command_log_file:
                self._command_log_file.close()
                self._command_log_file = None
            if self._traj_file:
                self._traj_file.close()
                self._traj_file = None

        if not self.rows:
            self._emit_telemetry(self.n_steps * self.sc.sim_dt, self.n_steps)
        report = compute_metrics(self.rows, len(self.sc.goals))
        return RunOutputs(metrics=report, rows=self.rows, command_log=self.command_log,
                          telemetry_lines=self.telemetry_lines, completed=self.completed)


def run_scenario(scenario: Scenario, gateway=None, commands=(), traj_path=None,
                 metrics_path=None, telemetry_path=None, command_log_path=None,
                 realtime=False) -> RunOutputs:
    """Execute a scenario and write the requested outputs.

    The trajectory CSV, telemetry stream, and command log are appended
    and flushed as the run progresses; only the metrics report waits
    for the end.
    """
    runner = Runner(scenario, gateway=gateway, commands=commands,
                    telemetry_path=telemetry_path, command_log_path=command_log_path,
                    traj_path=traj_path, realtime=realtime)
    out = runner.run()
    if metrics_path:
        with open(metrics_path, "w", encoding="utf-8") as fh:
            json.dump(out.metrics.to_dict(), fh, indent=2)
            fh.write("\n")
    return out
