"""Framed serial link between the autonomy unit and the firmware.

Wire layout (byte-exact contract, documented with golden vectors in
docs/protocol.md):

    0xAA 0x55 | len:u8 | kind:u8 | seq:u16 LE | payload | crc16:u16 BE

len counts payload bytes only (max 64).  The CRCature is
CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection, no final
xor) computed over len..payload inclusive and transmitted big-endian.
Multi-byte payload fields are little-endian.

The channel model injects latency, drops, single-bit corruption, and
blackout windows so the firmware watchdog path can be exercised.
"""

import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

SYNC = b"\xaa\x55"
MAX_PAYLOAD = 64
HEADER_LEN = 6   # sync(2) + len(1) + kind(1) + seq(2)
TRAILER_LEN = 2  # crc


class FrameKind(IntEnum):
    CMD_VEL = 0x01
    ESTOP = 0x02
    RESUME = 0x03
    LOCK = 0x04
    UNLOCK = 0x05
    STATUS = 0x10


# Fixed payload size per kind.
PAYLOAD_SIZE = {
    FrameKind.CMD_VEL: 4,
    FrameKind.ESTOP: 0,
    FrameKind.RESUME: 0,
    FrameKind.LOCK: 0,
    FrameKind.UNLOCK: 0,
    FrameKind.STATUS: 12,
}

_KNOWN_KINDS = {int(k) for k in FrameKind}


class EncodeError(ValueError):
    """Frame cannot be serialized (oversize or mismatched payload)."""


def _build_crc_table():
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
        table.append(crc & 0xFFFF)
    return table


_CRC_TABLE = _build_crc_table()


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE over data."""
    crc = 0xFFFF
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[(crc >> 8) ^ byte]
    return crc


@dataclass(frozen=True)
class Frame:
    kind: FrameKind
    seq: int
    payload: bytes = b""


def encode_frame(f: Frame) -> bytes:
    """Serialize a frame to wire bytes."""
    expected = PAYLOAD_SIZE.get(f.kind)
    if expected is not None and len(f.payload) != expected:
        raise EncodeError(f"{f.kind.name} payload must be {expected} bytes, got {len(f.payload)}")
    if len(f.payload) > MAX_PAYLOAD:
        raise EncodeError(f"payload too large: {len(f.payload)} > {MAX_PAYLOAD}")
    body = struct.pack("<BBH", len(f.payload), int(f.kind), f.seq & 0xFFFF) + f.payload
    return SYNC + body + struct.pack(">H", crc16(body))


def encode_cmd_vel(seq: int, left: float, right: float) -> bytes:
    """CmdVel frame carrying wheel speeds in centi-rad/s (i16 LE)."""
    to_centi = lambda w: max(-32767, min(32767, round(w * 100.0)))
    payload = struct.pack("<hh", to_centi(left), to_centi(right))
    return encode_frame(Frame(FrameKind.CMD_VEL, seq, payload))


def decode_cmd_vel(payload: bytes):
    """(left, right) wheel speeds in rad/s."""
    left, right = struct.unpack("<hh", payload)
    return left / 100.0, right / 100.0


def encode_status(seq: int, mode: int, lock: int, battery_mv: int, left_ticks: int, right_ticks: int) -> bytes:
    payload = struct.pack("<BBHii", mode & 0xFF, lock & 0xFF, battery_mv & 0xFFFF, left_ticks, right_ticks)
    return encode_frame(Frame(FrameKind.STATUS, seq, payload))


def decode_status(payload: bytes) -> dict:
    mode, lock, battery_mv, left_ticks, right_ticks = struct.unpack("<BBHii", payload)
    return {
        "mode": mode,
        "lock": lock,
        "battery_mv": battery_mv,
        "left_ticks": left_ticks,
        "right_ticks": right_ticks,
    }


class FrameDecoder:
    """Incremental frame parser.

    Feed arbitrary chunks; output is invariant under chunk boundaries.
    Resynchronizes on the sync pattern after garbage.  Frames with bad
    CRC or unknown kind bytes are counted, never delivered.
    """

    def __init__(self):
        self._buf = bytearray()
        self.crc_errors = 0
        self.seq_gaps = 0
        self._last_seq = None

    def feed(self, chunk: bytes) -> list:
        self._buf.extend(chunk)
        frames = []
        while True:
            start = self._buf.find(SYNC)
            if start < 0:
                # Keep a trailing 0xAA in case the 0x55 arrives next.
                keep = 1 if self._buf[-1:] == b"\xaa" else 0
                del self._buf[: len(self._buf) - keep]
                break
            if start:
                del self._buf[:start]
            if len(self._buf) < HEADER_LEN:
                break
            length = self._buf[2]
            if length > MAX_PAYLOAD:
                # Not a real header; skip this sync and rescan.
                del self._buf[:2]
                continue
            total = HEADER_LEN + length + TRAILER_LEN
            if len(self._buf) < total:
                break
            body = bytes(self._buf[2 : HEADER_LEN + length])
            (got_crc,) = struct.unpack(">H", self._buf[HEADER_LEN + length : total])
            if crc16(body) != got_crc:
                self.crc_errors += 1
                del self._buf[:2]  # drop sync, rescan inside
                continue
            kind_byte = body[1]
            if kind_byte not in _KNOWN_KINDS:
                self.crc_errors += 1
                del self._buf[:2]
                continue
            seq = struct.unpack("<H", body[2:4])[0]
            if self._last_seq is not None:
                self.seq_gaps += (seq - self._last_seq - 1) & 0xFFFF
            self._last_seq = seq
            frames.append(Frame(FrameKind(kind_byte), seq, body[4:]))
            del self._buf[:total]
        return frames


def feed_decoder(decoder: FrameDecoder, chunk: bytes):
    """Functional wrapper: returns (decoder, frames, total error count)."""
    frames = decoder.feed(chunk)
    return decoder, frames, decoder.crc_errors


@dataclass
class ChannelModel:
    """Fault parameters for one direction of the serial link."""

    latency: float = 0.0
    drop_prob: float = 0.0
    corrupt_prob: float = 0.0
    blackout_intervals: tuple = ()  # ((t_start, t_end), ...) half-open

    def __post_init__(self):
        if self.latency < 0:
            raise ValueError("latency must be >= 0")
        ivs = sorted(tuple(i) for i in self.blackout_intervals)
        for (a0, a1), (b0, b1) in zip(ivs, ivs[1:]):
            if b0 < a1:
                raise ValueError(f"blackout intervals overlap: {(a0, a1)} and {(b0, b1)}")
        self.blackout_intervals = tuple(ivs)

    def in_blackout(self, t: float) -> bool:
        return any(t0 <= t < t1 for t0, t1 in self.blackout_intervals)


class Channel:
    """One direction of the link: queues byte chunks, applies faults."""

    def __init__(self, model: ChannelModel, rng: np.random.Generator):
        self.model = model
        self.rng = rng
        self._inflight = []  # [(deliver_time, bytes)] in send order

    def send(self, data: bytes, t_now: float):
        if self.model.drop_prob > 0 and self.rng.random() < self.model.drop_prob:
            return
        self._inflight.append((t_now + self.model.latency, data))

    def step(self, t_now: float) -> bytes:
        """Deliver everything due by t_now; chunks due during a blackout
        are lost, not delayed."""
        out = bytearray()
        remaining = []
        for due, data in self._inflight:
            if due > t_now:
                remaining.append((due, data))
                continue
            if self.model.in_blackout(due):
                continue
            if self.model.corrupt_prob > 0 and self.rng.random() < self.model.corrupt_prob:
                data = self._flip_random_bit(data)
            out.extend(data)
        self._inflight = remaining
        return bytes(out)

    def _flip_random_bit(self, data: bytes) -> bytes:
        if not data:
            return data
        buf = bytearray(data)
        bit = int(self.rng.integers(0, len(buf) * 8))
        buf[bit // 8] ^= 1 << (bit % 8)
        return bytes(buf)
