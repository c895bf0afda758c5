"""Command-line interface.

    deliverybot size --v 3.0 [--params robot.yaml]
    deliverybot run --scenario s.yaml [--seed N] [--headless] [--serve ADDR]
                    [--log telemetry.jsonl] [--traj trajectory.csv]
                    [--metrics metrics.json] [--commands cmds.jsonl] [--realtime]
    deliverybot replay --log telemetry.jsonl [--serve ADDR] [--speed X]

`run --log` records the exact telemetry byte stream, which `replay --log`
re-broadcasts to connected consoles.  Exit code 0 means the run
completed (independent of mission success).

Heavy imports (numba kernels, the runner) stay inside the subcommands
so `size` answers instantly.
"""

import json
import sys
import time

import click

from .kinematics import ParameterError, RobotParams, actuator_sizing


def _parse_addr(addr: str):
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)


@click.group()
def main():
    """Deterministic delivery-robot twin."""


@main.command()
@click.option("--v", "v_target", type=float, required=True, help="Target linear speed, m/s.")
@click.option("--params", "params_path", type=click.Path(exists=True), default=None,
              help="YAML file overriding robot parameters.")
def size(v_target, params_path):
    """Print drivetrain sizing for a target speed."""
    kw = {}
    if params_path:
        import yaml

        with open(params_path, "r", encoding="utf-8") as fh:
            kw = yaml.safe_load(fh) or {}
    try:
        params = RobotParams(**kw)
        rep = actuator_sizing(params, v_target)
    except (ParameterError, TypeError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"target speed        {v_target:10.3f} m/s")
    click.echo(f"wheel speed         {rep.omega_required:10.3f} rad/s")
    click.echo(f"motor speed         {rep.rpm_required:10.2f} rpm")
    click.echo(f"total weight        {rep.weight:10.2f} N")
    click.echo(f"per-wheel load      {rep.wheel_load:10.2f} N")
    click.echo(f"traction force      {rep.traction_force:10.2f} N")
    click.echo(f"startup torque      {rep.startup_torque:10.4f} N*m")


@main.command()
@click.option("--scenario", "scenario_path", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--headless", is_flag=True, help="No gateway even if --serve is absent (default).")
@click.option("--serve", "serve_addr", default=None, help="Gateway address, e.g. 127.0.0.1:8080.")
@click.option("--log", "telemetry_path", type=click.Path(), default=None,
              help="Append the telemetry byte stream (replayable).")
@click.option("--traj", "traj_path", type=click.Path(), default=None,
              help="Write the trajectory CSV.")
@click.option("--metrics", "metrics_path", type=click.Path(), default=None,
              help="Write the metrics report JSON.")
@click.option("--commands", "commands_path", type=click.Path(exists=True), default=None,
              help="Inject a recorded command log (JSONL of [t, cmd]).")
@click.option("--command-log", "command_log_path", type=click.Path(), default=None,
              help="Record applied operator commands for replay.")
@click.option("--realtime", is_flag=True, help="Pace simulation time to the wall clock.")
def run(scenario_path, seed, headless, serve_addr, telemetry_path, traj_path,
        metrics_path, commands_path, command_log_path, realtime):
    """Execute a scenario file."""
    from dataclasses import replace as dc_replace

    from .runner import run_scenario
    from .scenario import ScenarioError, load_scenario

    try:
        scenario = load_scenario(scenario_path)
    except ScenarioError as exc:
        raise click.ClickException(f"scenario rejected: {exc}")
    if seed is not None:
        scenario = dc_replace(scenario, seed=seed)

    commands = []
    if commands_path:
        with open(commands_path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    t, cmd = json.loads(line)
                    commands.append((float(t), cmd))

    gateway = None
    if serve_addr and not headless:
        from .gateway import Gateway

        host, port = _parse_addr(serve_addr)
        gateway = Gateway(host, port).start()
        click.echo(f"gateway listening on ws://{gateway.host}:{gateway.port}/ws", err=True)

    try:
        out = run_scenario(scenario, gateway=gateway, commands=commands,
                           traj_path=traj_path, metrics_path=metrics_path,
                           telemetry_path=telemetry_path,
                           command_log_path=command_log_path, realtime=realtime)
    finally:
        if gateway is not None:
            gateway.stop()

    m = out.metrics
    click.echo(f"elapsed {m.elapsed:.2f} s  distance {m.distance:.2f} m  "
               f"goals {sum(m.goal_success)}/{len(m.goal_success)}  "
               f"collisions {m.collisions}  failsafes {m.failsafe_events}  "
               f"estops {m.estop_events}")
    click.echo(f"deviation mean/max {m.path_deviation_mean:.3f}/{m.path_deviation_max:.3f} m  "
               f"heading rmse {m.heading_rmse:.3f} rad")
    sys.exit(0 if out.completed else 1)


@main.command()
@click.option("--log", "log_path", type=click.Path(exists=True), required=True,
              help="Telemetry stream recorded by `run --log`.")
@click.option("--serve", "serve_addr", default="127.0.0.1:8080")
@click.option("--speed", type=float, default=1.0, help="Playback speed factor.")
def replay(log_path, serve_addr, speed):
    """Re-broadcast a recorded telemetry stream to connected consoles."""
    from .gateway import Gateway

    host, port = _parse_addr(serve_addr)
    gateway = Gateway(host, port).start()
    click.echo(f"replaying {log_path} on ws://{gateway.host}:{gateway.port}/ws "
               f"at {speed:g}x (ctrl-c to stop)", err=True)
    try:
        with open(log_path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
        prev_t = None
        for line in lines:
            if not line.strip():
                continue
            record = json.loads(line)
            t = float(record.get("t", 0.0))
            if prev_t is not None and t > prev_t:
                time.sleep((t - prev_t) / max(speed, 1e-9))
            prev_t = t
            gateway.publish(line if line.endswith("\n") else line + "\n")
            ignored = gateway.pop_commands()
            if ignored:
                click.echo(f"replay ignores {len(ignored)} operator command(s)", err=True)
        click.echo("replay finished; serving until interrupted", err=True)
        while True:
            time.sleep(0.5)
            gateway.pop_commands()
    except KeyboardInterrupt:
        pass
    finally:
        gateway.stop()


if __name__ == "__main__":
    main()
