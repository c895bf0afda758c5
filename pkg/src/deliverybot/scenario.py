"""Scenario files: strict schema, documented defaults.

YAML with every key validated; unknown keys, duplicate keys, missing
required fields, and task periods that are not integer multiples of
sim_dt are all rejected with the offending key path in the message.
"""

import math
from dataclasses import dataclass, field

import yaml

from .estimation import NoiseConfig
from .firmware import FirmwareConfig, PidGains
from .kinematics import ParameterError, Pose2D, RobotParams, Twist2D
from .link import ChannelModel
from .plant import Agent, AgentClass, BatteryState, LidarParams, World
from .planning import MppiParams

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Scenario file rejected; message carries the key path."""


class _StrictLoader(yaml.SafeLoader):
    pass


def _no_duplicates(loader, node, deep=False):
    mapping = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in mapping:
            raise ScenarioError(f"duplicate key {key!r} at line {key_node.start_mark.line + 1}")
        mapping[key] = loader.construct_object(value_node, deep=deep)
    return mapping


_StrictLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _no_duplicates)


@dataclass(frozen=True)
class Rates:
    control_hz: float = 100.0
    status_div: int = 5          # status every N control ticks (-> 20 Hz)
    autonomy_hz: float = 10.0
    telemetry_hz: float = 10.0
    lidar_hz: float = 10.0
    gps_hz: float = 2.0
    map_snapshot_period: float = 2.0


@dataclass(frozen=True)
class MapConfig:
    resolution: float = 0.05
    l_occ: float = 0.85
    l_free: float = -0.40
    l_max: float = 10.0
    occ_threshold: float = 2.0
    inflation_radius: float = 0.37


@dataclass(frozen=True)
class PlannerConfig:
    alpha: float = 0.25          # meters added per unit normalized cell cost
    replan_stray: float = 1.0    # m off the path before a global replan
    goal_radius: float = 0.3


@dataclass(frozen=True)
class DetectorConfig:
    fov: float = math.pi
    max_range: float = 6.0
    noise_xy: float = 0.05
    dropout: float = 0.05


@dataclass(frozen=True)
class SlipConfig:
    """Ground-contact error between wheel rotation and true motion."""

    skid_gain: float = 0.03      # heading scale error while turning
    sigma_wheel: float = 0.05    # rad/s white noise on ground speeds


@dataclass(frozen=True)
class SensorNoise:
    gps_sigma_xy: float = 0.4
    imu_sigma_yaw_rate: float = 0.02


@dataclass(frozen=True)
class BatteryConfig:
    state: BatteryState = field(default_factory=BatteryState)
    base_current: float = 0.5    # A logic draw
    motor_current: float = 1.5   # A per unit average |pwm|
    overrides: tuple = ()        # ((t0, t1, forced_volts), ...)


@dataclass(frozen=True)
class FaultConfig:
    channel: ChannelModel = field(default_factory=ChannelModel)


@dataclass(frozen=True)
class Scenario:
    seed: int
    duration: float
    world: World
    goals: tuple
    sim_dt: float = 0.005
    robot: RobotParams = field(default_factory=RobotParams)
    robot_start: Pose2D = field(default_factory=Pose2D)
    robot_footprint: tuple = (0.55, 0.54)
    motor_tau: float = 0.15
    lidar: LidarParams = field(default_factory=LidarParams)
    sensor_noise: SensorNoise = field(default_factory=SensorNoise)
    slip: SlipConfig = field(default_factory=SlipConfig)
    ekf_noise: NoiseConfig = field(default_factory=NoiseConfig)
    faults: FaultConfig = field(default_factory=FaultConfig)
    rates: Rates = field(default_factory=Rates)
    mppi: MppiParams = field(default_factory=MppiParams)
    map: MapConfig = field(default_factory=MapConfig)
    pid: PidGains = field(default_factory=PidGains)
    firmware: FirmwareConfig = None
    battery: BatteryConfig = field(default_factory=BatteryConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    stop_on_success: bool = True
    script: tuple = ()           # ((t, {"cmd": ...}), ...)
    name: str = "scenario"

    def __post_init__(self):
        if self.duration <= 0:
            raise ScenarioError("duration must be > 0")
        if self.sim_dt <= 0:
            raise ScenarioError("sim_dt must be > 0")
        if not self.goals:
            raise ScenarioError("at least one goal is required")
        if self.firmware is None:
            object.__setattr__(self, "firmware", FirmwareConfig(
                gains=self.pid, t_ctrl=1.0 / self.rates.control_hz,
                n_status=self.rates.status_div))
        for label, hz in (("control_hz", self.rates.control_hz),
                          ("autonomy_hz", self.rates.autonomy_hz),
                          ("telemetry_hz", self.rates.telemetry_hz),
                          ("lidar_hz", self.rates.lidar_hz),
                          ("gps_hz", self.rates.gps_hz)):
            self.divider(1.0 / hz, f"rates.{label}")
        xmin, ymin, xmax, ymax = self.world.bounds
        for i, (gx, gy) in enumerate(self.goals):
            if not (xmin <= gx <= xmax and ymin <= gy <= ymax):
                raise ScenarioError(f"goals[{i}] outside world bounds")

    def divider(self, period: float, label: str) -> int:
        """Steps per period; rejects non-integer multiples of sim_dt."""
        n = period / self.sim_dt
        if abs(n - round(n)) > 1e-6 or round(n) < 1:
            raise ScenarioError(
                f"{label}: period {period} s is not an integer multiple of sim_dt {self.sim_dt}")
        return int(round(n))


def _section(data: dict, key: str, allowed: dict, where: str) -> dict:
    raw = data.pop(key, None)
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where}.{key} must be a mapping")
    unknown = set(raw) - set(allowed)
    if unknown:
        raise ScenarioError(f"unknown key(s) {sorted(unknown)} in {where}.{key}")
    out = {}
    for name, conv in allowed.items():
        if name in raw:
            try:
                out[name] = conv(raw[name])
            except ScenarioError:
                raise
            except (TypeError, ValueError) as exc:
                raise ScenarioError(f"bad value for {where}.{key}.{name}: {exc}") from exc
    return out


def _pair(v):
    a, b = v
    return (float(a), float(b))


def _agents(raw):
    agents = []
    classes = {c.value: c for c in AgentClass}
    for i, a in enumerate(raw):
        unknown = set(a) - {"id", "class", "pose", "twist", "footprint"}
        if unknown:
            raise ScenarioError(f"unknown key(s) {sorted(unknown)} in world.agents[{i}]")
        cls = a.get("class", "Pedestrian")
        if cls not in classes:
            raise ScenarioError(f"world.agents[{i}].class {cls!r} not in {sorted(classes)}")
        px, py, pth = a.get("pose", (0.0, 0.0, 0.0))
        tv, tw = a.get("twist", (0.0, 0.0))
        agents.append(Agent(
            agent_id=int(a.get("id", i)),
            cls=classes[cls],
            pose=Pose2D(float(px), float(py), float(pth)),
            twist=Twist2D(float(tv), float(tw)),
            footprint=_pair(a.get("footprint", (0.4, 0.4))),
        ))
    return tuple(agents)


def scenario_from_dict(data: dict, name: str = "scenario") -> Scenario:
    """Build a Scenario from parsed YAML, validating strictly."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario file must be a mapping at top level")
    data = dict(data)

    top_simple = {}
    for key, conv in (("seed", int), ("duration", float), ("sim_dt", float),
                      ("motor_tau", float), ("stop_on_success", bool), ("name", str)):
        if key in data:
            top_simple[key] = conv(data.pop(key))
    for key in ("seed", "duration"):
        if key not in top_simple:
            raise ScenarioError(f"missing required key {key!r}")
    top_simple.setdefault("name", name)

    world_raw = data.pop("world", None)
    if world_raw is None:
        raise ScenarioError("missing required key 'world'")
    unknown = set(world_raw) - {"bounds", "obstacles", "agents"}
    if unknown:
        raise ScenarioError(f"unknown key(s) {sorted(unknown)} in world")
    if "bounds" not in world_raw:
        raise ScenarioError("missing required key world.bounds")
    bounds = tuple(float(v) for v in world_raw["bounds"])
    if len(bounds) != 4:
        raise ScenarioError("world.bounds must be [xmin, ymin, xmax, ymax]")
    obstacles = tuple(tuple(float(v) for v in r) for r in world_raw.get("obstacles", ()))
    try:
        world = World(bounds=bounds, static_obstacles=obstacles,
                      agents=_agents(world_raw.get("agents", ())))
    except ParameterError as exc:
        raise ScenarioError(f"world: {exc}") from exc

    goals_raw = data.pop("goals", None)
    if not goals_raw:
        raise ScenarioError("missing required key 'goals' (at least one [x, y])")
    goals = tuple(_pair(g) for g in goals_raw)

    start_raw = data.pop("robot_start", (0.0, 0.0, 0.0))
    robot_start = Pose2D(*(float(v) for v in start_raw))
    footprint = _pair(data.pop("robot_footprint", (0.55, 0.54)))

    kw = {}
    kw.update(_section(data, "robot", {
        "mass": float, "wheel_radius": float, "track_width": float,
        "wheel_count": int, "mu": float, "g": float, "v_max": float,
        "wheel_omega_max": float, "ticks_per_wheel_rev": int}, "scenario"))
    robot = RobotParams(**kw) if kw else RobotParams()

    lidar_kw = _section(data, "lidar", {
        "n_beams": int, "fov": float, "max_range": float, "sigma_r": float}, "scenario")
    noise_kw = _section(data, "noise", {
        "gps_sigma_xy": float, "imu_sigma_yaw_rate": float}, "scenario")
    slip_kw = _section(data, "slip", {"skid_gain": float, "sigma_wheel": float}, "scenario")
    rates_kw = _section(data, "rates", {
        "control_hz": float, "status_div": int, "autonomy_hz": float,
        "telemetry_hz": float, "lidar_hz": float, "gps_hz": float,
        "map_snapshot_period": float}, "scenario")
    mppi_kw = _section(data, "mppi", {
        "k_rollouts": int, "horizon": int, "dt": float, "temperature": float,
        "sigma_v": float, "sigma_omega": float, "w_obs": float, "w_path": float,
        "w_goal": float, "w_ctrl": float, "w_progress": float,
        "v_bounds": _pair, "omega_bounds": _pair},
        "scenario")
    map_kw = _section(data, "map", {
        "resolution": float, "l_occ": float, "l_free": float, "l_max": float,
        "occ_threshold": float, "inflation_radius": float}, "scenario")
    pid_kw = _section(data, "pid", {
        "kp": float, "ki": float, "kd": float, "out_min": float, "out_max": float,
        "integral_min": float, "integral_max": float}, "scenario")
    planner_kw = _section(data, "planner", {
        "alpha": float, "replan_stray": float, "goal_radius": float}, "scenario")
    detector_kw = _section(data, "detector", {
        "fov": float, "max_range": float, "noise_xy": float, "dropout": float}, "scenario")

    faults_raw = _section(data, "faults", {
        "latency": float, "drop_prob": float, "corrupt_prob": float,
        "blackouts": lambda v: tuple(_pair(iv) for iv in v),
        "battery_overrides": lambda v: tuple((float(a), float(b), float(c)) for a, b, c in v),
    }, "scenario")
    battery_raw = _section(data, "battery", {
        "soc": float, "capacity": float, "internal_resistance": float,
        "v_full": float, "v_empty": float, "v_fault": float,
        "base_current": float, "motor_current": float}, "scenario")

    fw_kw = _section(data, "firmware", {
        "watchdog_timeout": float, "n_status": int, "v_fault": float}, "scenario")

    script_raw = data.pop("script", ())
    script = []
    for i, entry in enumerate(script_raw):
        unknown = set(entry) - {"t", "cmd", "x", "y"}
        if unknown:
            raise ScenarioError(f"unknown key(s) {sorted(unknown)} in script[{i}]")
        if "t" not in entry or "cmd" not in entry:
            raise ScenarioError(f"script[{i}] needs 't' and 'cmd'")
        cmd = {"cmd": str(entry["cmd"])}
        if "x" in entry:
            cmd["x"] = float(entry["x"])
        if "y" in entry:
            cmd["y"] = float(entry["y"])
        script.append((float(entry["t"]), cmd))

    if data:
        raise ScenarioError(f"unknown top-level key(s): {sorted(data)}")

    pid = PidGains(**pid_kw) if pid_kw else PidGains()
    rates = Rates(**rates_kw) if rates_kw else Rates()

    battery_state_kw = {k: battery_raw[k] for k in
                        ("soc", "capacity", "internal_resistance", "v_full", "v_empty")
                        if k in battery_raw}
    battery = BatteryConfig(
        state=BatteryState(**battery_state_kw) if battery_state_kw else BatteryState(),
        base_current=battery_raw.get("base_current", 0.5),
        motor_current=battery_raw.get("motor_current", 1.5),
        overrides=faults_raw.get("battery_overrides", ()),
    )
    channel = ChannelModel(
        latency=faults_raw.get("latency", 0.0),
        drop_prob=faults_raw.get("drop_prob", 0.0),
        corrupt_prob=faults_raw.get("corrupt_prob", 0.0),
        blackout_intervals=faults_raw.get("blackouts", ()),
    )
    firmware = FirmwareConfig(
        gains=pid, t_ctrl=1.0 / rates.control_hz, n_status=rates.status_div,
        watchdog_timeout=fw_kw.get("watchdog_timeout", 0.200),
        v_fault=fw_kw.get("v_fault", battery_raw.get("v_fault", 6.4)),
    )

    sensor_noise = SensorNoise(**noise_kw) if noise_kw else SensorNoise()
    # The filter's measurement variances track the configured sensors.
    import numpy as np

    ekf_noise = NoiseConfig(
        r_gps=np.diag([max(sensor_noise.gps_sigma_xy, 1e-3) ** 2] * 2),
        r_yawrate=max(sensor_noise.imu_sigma_yaw_rate, 1e-4) ** 2,
    )

    try:
        return Scenario(
            world=world, goals=goals, robot=robot, robot_start=robot_start,
            robot_footprint=footprint,
            lidar=LidarParams(**lidar_kw) if lidar_kw else LidarParams(),
            sensor_noise=sensor_noise,
            ekf_noise=ekf_noise,
            slip=SlipConfig(**slip_kw) if slip_kw else SlipConfig(),
            faults=FaultConfig(channel=channel),
            rates=rates,
            mppi=MppiParams(**mppi_kw) if mppi_kw else MppiParams(),
            map=MapConfig(**map_kw) if map_kw else MapConfig(),
            pid=pid, firmware=firmware, battery=battery,
            planner=PlannerConfig(**planner_kw) if planner_kw else PlannerConfig(),
            detector=DetectorConfig(**detector_kw) if detector_kw else DetectorConfig(),
            script=tuple(script),
            **top_simple,
        )
    except (ParameterError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from exc


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.load(fh, Loader=_StrictLoader)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
    import os

    name = os.path.splitext(os.path.basename(str(path)))[0]
    return scenario_from_dict(data, name=name)
