"""Deterministic emulation of the low-level control firmware.

A fixed-rate control tick runs one PID loop per wheel side, a watchdog
that zeroes PWM when no valid command arrives within the timeout, a
latched battery-fault monitor, the package lock, and the relay kill
output.  The state machine is advanced by exactly two entry points
(on_frame, control_tick) called in timestamp order; everything is a
fixed-size value, mirroring a statically-allocated firmware image.

Safety invariant: in any mode other than OPERATIONAL both PWM outputs
are exactly zero.
"""

from dataclasses import dataclass, field, replace
from enum import IntEnum

from .kinematics import WheelSpeeds
from .link import Frame, FrameKind, PAYLOAD_SIZE, decode_cmd_vel, encode_status

WATCHDOG_TIMEOUT = 0.200  # s


class Mode(IntEnum):
    INIT = 0
    OPERATIONAL = 1
    FAILSAFE = 2
    ESTOPPED = 3
    BATTERY_FAULT = 4


class Lock(IntEnum):
    LOCKED = 0
    UNLOCKED = 1


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.06
    ki: float = 0.9
    kd: float = 0.0
    out_min: float = -1.0
    out_max: float = 1.0
    integral_min: float = -1.0
    integral_max: float = 1.0

    def __post_init__(self):
        if not self.out_min < self.out_max:
            raise ValueError("out_min must be < out_max")
        if self.integral_min < self.out_min or self.integral_max > self.out_max:
            raise ValueError("integral bounds must lie within output bounds")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float = 0.0
    initialized: bool = False


def pid_step(g: PidGains, s: PidState, setpoint: float, measured: float, dt: float):
    """One PID update; returns (duty, new state).

    Anti-windup clamps the integral after accumulation; the derivative
    acts on the error and is suppressed on the first call.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    error = setpoint - measured
    integral = s.integral + g.ki * error * dt
    integral = max(g.integral_min, min(g.integral_max, integral))
    derivative = (error - s.prev_error) / dt if s.initialized else 0.0
    duty = g.kp * error + integral + g.kd * derivative
    duty = max(g.out_min, min(g.out_max, duty))
    return duty, PidState(integral=integral, prev_error=error, initialized=True)


def watchdog_mode(last_cmd_rx, now: float, timeout: float = WATCHDOG_TIMEOUT) -> Mode:
    """FAILSAFE iff the command gap strictly exceeds the timeout."""
    if last_cmd_rx is None:
        return Mode.FAILSAFE
    if now < last_cmd_rx:
        raise ValueError("time went backwards")
    return Mode.FAILSAFE if now - last_cmd_rx > timeout else Mode.OPERATIONAL


@dataclass(frozen=True)
class FirmwareConfig:
    gains: PidGains = PidGains()
    t_ctrl: float = 0.010           # control period, s
    watchdog_timeout: float = WATCHDOG_TIMEOUT
    n_status: int = 5               # status frame every N control ticks
    v_fault: float = 6.4            # battery fault threshold, V


@dataclass(frozen=True)
class FirmwareState:
    mode: Mode = Mode.INIT
    last_cmd_rx: float = None
    setpoints: WheelSpeeds = field(default_factory=WheelSpeeds)
    pid_left: PidState = field(default_factory=PidState)
    pid_right: PidState = field(default_factory=PidState)
    lock: Lock = Lock.LOCKED
    relay_closed: bool = True
    tick_count: int = 0
    status_seq: int = 0
    bad_frames: int = 0
    ignored_frames: int = 0


def on_frame(fw: FirmwareState, f: Frame, now: float) -> FirmwareState:
    """Apply one CRC-validated frame to the firmware state."""
    expected = PAYLOAD_SIZE.get(f.kind)
    if expected is not None and len(f.payload) != expected:
        return replace(fw, bad_frames=fw.bad_frames + 1)

    if f.kind == FrameKind.CMD_VEL:
        left, right = decode_cmd_vel(f.payload)
        mode = fw.mode
        if mode in (Mode.INIT, Mode.FAILSAFE):
            mode = Mode.OPERATIONAL
        return replace(fw, setpoints=WheelSpeeds(left, right), last_cmd_rx=now, mode=mode)
    if f.kind == FrameKind.ESTOP:
        return replace(fw, mode=Mode.ESTOPPED, relay_closed=False,
                       setpoints=WheelSpeeds(), pid_left=PidState(), pid_right=PidState())
    if f.kind == FrameKind.RESUME:
        if fw.mode in (Mode.ESTOPPED, Mode.BATTERY_FAULT):
            return replace(fw, mode=Mode.OPERATIONAL, relay_closed=True)
        return fw
    if f.kind == FrameKind.LOCK:
        return replace(fw, lock=Lock.LOCKED)
    if f.kind == FrameKind.UNLOCK:
        return replace(fw, lock=Lock.UNLOCKED)
    # Status frames never target the firmware.
    return replace(fw, ignored_frames=fw.ignored_frames + 1)


def control_tick(fw: FirmwareState, encoder_rates: WheelSpeeds, encoder_ticks,
                 battery_v: float, now: float, config: FirmwareConfig = FirmwareConfig()):
    """One fixed-rate control tick.

    Returns (pwm_left, pwm_right, new state, status frame bytes or None).
    encoder_ticks are the cumulative (left, right) counts echoed in
    Status frames.
    """
    mode = fw.mode
    if mode == Mode.ESTOPPED:
        pass
    elif battery_v < config.v_fault:
        mode = Mode.BATTERY_FAULT
    elif mode == Mode.BATTERY_FAULT:
        pass  # latched until Resume
    elif mode == Mode.INIT:
        pass  # waiting for the first command
    else:
        mode = watchdog_mode(fw.last_cmd_rx, now, config.watchdog_timeout)

    if mode == Mode.OPERATIONAL:
        pwm_left, pid_left = pid_step(config.gains, fw.pid_left,
                                      fw.setpoints.left, encoder_rates.left, config.t_ctrl)
        pwm_right, pid_right = pid_step(config.gains, fw.pid_right,
                                        fw.setpoints.right, encoder_rates.right, config.t_ctrl)
    else:
        pwm_left = pwm_right = 0.0
        pid_left = PidState()
        pid_right = PidState()

    tick_count = fw.tick_count + 1
    status_seq = fw.status_seq
    status = None
    if tick_count % config.n_status == 0:
        battery_mv = max(0, min(0xFFFF, round(battery_v * 1000.0)))
        status = encode_status(status_seq, int(mode), int(fw.lock), battery_mv,
                               encoder_ticks[0], encoder_ticks[1])
        status_seq = (status_seq + 1) & 0xFFFF

    new = replace(fw, mode=mode, pid_left=pid_left, pid_right=pid_right,
                  tick_count=tick_count, status_seq=status_seq)
    return pwm_left, pwm_right, new, status
