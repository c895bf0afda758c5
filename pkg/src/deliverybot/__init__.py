"""Deterministic software twin of a differential-drive delivery robot.

The package wires a seeded 2D plant, a firmware emulation (PID + watchdog
failsafe + package lock), a CRC-framed serial link with fault injection,
and an autonomy stack (EKF fusion, log-odds occupancy mapping, A* global
planning, MPPI local control) into a fixed-step scenario runner with a
live telemetry gateway.
"""

__version__ = "0.1.0"
