"""Seeded, named random streams.

Every noise source in the simulation draws from its own counter-based
Philox stream keyed by (scenario seed, stream name), so adding or
reordering draws in one subsystem never perturbs another.  Identical
seeds therefore reproduce identical trajectories bit for bit.
"""

import numpy as np

# Registry of stream names -> fixed sub-key.  Append only; never renumber.
STREAMS = {
    "lidar": 1,
    "gps_imu": 2,
    "detector": 3,
    "channel_down": 4,
    "channel_up": 5,
    "mppi": 6,
    "wheel_slip": 7,
    "agents": 8,
}


def stream(seed: int, name: str) -> np.random.Generator:
    """Return the dedicated generator for a named noise source."""
    try:
        sub = STREAMS[name]
    except KeyError:
        raise ValueError(f"unknown RNG stream {name!r}") from None
    # Philox accepts a 128-bit key: high word = scenario seed, low word = stream id.
    key = ((int(seed) & 0xFFFFFFFFFFFFFFFF) << 64) | sub
    return np.random.Generator(np.random.Philox(key=key))


def streams(seed: int) -> dict:
    """All named generators for one scenario seed."""
    return {name: stream(seed, name) for name in STREAMS}
