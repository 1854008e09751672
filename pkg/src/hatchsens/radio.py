"""20-byte application frame codec with CRC-16/CCITT-FALSE and the lossy
star-topology medium between the nodes and the gateway.

Wire layout (all multi-byte fields big-endian):

    [0]      sync 0xA5
    [1]      version 0x01
    [2]      frame type (DATA 0x01, ACK 0x02, CMD 0x03, HEARTBEAT 0x04)
    [3:5]    src addr          (gateway 0x0000, broadcast 0xFFFF)
    [5:7]    dst addr
    [7:9]    seq
    [9]      sensor-kind code (DATA) / command code (CMD) / 0x00
    [10:14]  timestamp, unsigned sim seconds
    [14:18]  payload, signed two's-complement (centi-units / seconds /
             battery centi-percent / 0)
    [18:20]  CRC-16/CCITT-FALSE over bytes 0..17
"""

from __future__ import annotations

import binascii
import random
import struct
from dataclasses import dataclass
from enum import IntEnum

SYNC = 0xA5
VERSION = 0x01
FRAME_LEN = 20
GATEWAY_ADDR = 0x0000
BROADCAST_ADDR = 0xFFFF

_STRUCT = struct.Struct(">BBBHHHBIi")  # everything but the trailing CRC


class FrameType(IntEnum):
    DATA = 0x01
    ACK = 0x02
    CMD = 0x03
    HEARTBEAT = 0x04


class CommandCode(IntEnum):
    SET_INTERVAL = 0x10
    SLEEP = 0x11
    WAKE = 0x12


class FrameError(ValueError):
    """Base for all codec failures; subclasses name the offending field."""


class BadLength(FrameError):
    pass


class BadSync(FrameError):
    pass


class UnknownVersion(FrameError):
    pass


class UnknownType(FrameError):
    pass


class BadCrc(FrameError):
    pass


class EncodeError(FrameError):
    pass


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xor-out."""
    return binascii.crc_hqx(data, 0xFFFF)


@dataclass(frozen=True)
class Frame:
    ftype: FrameType
    src: int
    dst: int
    seq: int
    kind_or_code: int = 0
    timestamp: int = 0
    payload: int = 0

    def is_broadcast(self) -> bool:
        return self.dst == BROADCAST_ADDR


def _check_u16(name: str, v: int):
    if not (0 <= v <= 0xFFFF):
        raise EncodeError(f"{name} out of range: {v}")


def encode_frame(f: Frame) -> bytes:
    if f.ftype not in FrameType.__members__.values():
        raise EncodeError(f"unknown frame type {f.ftype!r}")
    _check_u16("src", f.src)
    _check_u16("dst", f.dst)
    _check_u16("seq", f.seq)
    if not (0 <= f.kind_or_code <= 0xFF):
        raise EncodeError(f"kind_or_code out of range: {f.kind_or_code}")
    if not (0 <= f.timestamp <= 0xFFFFFFFF):
        raise EncodeError(f"timestamp out of range: {f.timestamp}")
    if not (-(2**31) <= f.payload <= 2**31 - 1):
        raise EncodeError(f"payload out of range: {f.payload}")
    body = _STRUCT.pack(
        SYNC,
        VERSION,
        int(f.ftype),
        f.src,
        f.dst,
        f.seq,
        f.kind_or_code,
        f.timestamp,
        f.payload,
    )
    return body + crc16(body).to_bytes(2, "big")


def decode_frame(data: bytes) -> Frame:
    """Parse arbitrary bytes; raises a field-precise FrameError subclass."""
    if len(data) != FRAME_LEN:
        raise BadLength(f"expected {FRAME_LEN} bytes, got {len(data)}")
    if data[0] != SYNC:
        raise BadSync(f"bad sync byte 0x{data[0]:02x}")
    if data[1] != VERSION:
        raise UnknownVersion(f"unknown version 0x{data[1]:02x}")
    if data[2] not in (0x01, 0x02, 0x03, 0x04):
        raise UnknownType(f"unknown frame type 0x{data[2]:02x}")
    if crc16(data[:18]) != int.from_bytes(data[18:20], "big"):
        raise BadCrc("crc mismatch")
    _, _, ftype, src, dst, seq, koc, ts, payload = _STRUCT.unpack(data[:18])
    return Frame(FrameType(ftype), src, dst, seq, koc, ts, payload)


@dataclass(frozen=True)
class DirectionParams:
    loss_probability: float = 0.0
    base_ms: float = 2.0
    jitter_ms: float = 3.0
    bit_flip_probability: float = 0.0

    def __post_init__(self):
        for name in ("loss_probability", "bit_flip_probability"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.base_ms < 0 or self.jitter_ms < 0:
            raise ValueError("latencies must be non-negative")


@dataclass(frozen=True)
class LinkParams:
    """Symmetric defaults with optional per-direction overrides."""

    loss_probability: float = 0.0
    base_ms: float = 2.0
    jitter_ms: float = 3.0
    bit_flip_probability: float = 0.0
    uplink: DirectionParams | None = None
    downlink: DirectionParams | None = None

    def __post_init__(self):
        # construct once to reuse the DirectionParams range checks
        DirectionParams(
            self.loss_probability, self.base_ms, self.jitter_ms, self.bit_flip_probability
        )

    def for_direction(self, direction: str) -> DirectionParams:
        override = self.uplink if direction == "up" else self.downlink
        if override is not None:
            return override
        return DirectionParams(
            self.loss_probability, self.base_ms, self.jitter_ms, self.bit_flip_probability
        )


@dataclass(frozen=True)
class Delivery:
    arrive_t: float
    data: bytes


def transmit(
    params: DirectionParams, data: bytes, now: float, rng: random.Random
) -> Delivery | None:
    """One attempt over the air: None means dropped.

    Latency is base + uniform(0, jitter); an optional single-bit flip
    corrupts the copy in flight.  All randomness comes from the caller's
    seeded stream.
    """
    if params.loss_probability > 0.0 and rng.random() < params.loss_probability:
        return None
    delay = params.base_ms / 1000.0
    if params.jitter_ms > 0.0:
        delay += rng.uniform(0.0, params.jitter_ms / 1000.0)
    if params.bit_flip_probability > 0.0 and rng.random() < params.bit_flip_probability:
        pos = rng.randrange(len(data) * 8)
        corrupted = bytearray(data)
        corrupted[pos // 8] ^= 1 << (pos % 8)
        data = bytes(corrupted)
    return Delivery(now + delay, data)


class Medium:
    """The shared channel; owns the two directional seeded streams and the
    uplink/downlink counters used in the end-of-run summary."""

    def __init__(self, link: LinkParams, rng_up: random.Random, rng_down: random.Random):
        self.link = link
        self._rng = {"up": rng_up, "down": rng_down}
        self.sent = {"up": 0, "down": 0}
        self.dropped = {"up": 0, "down": 0}
        self.frame_log = None  # optional callable(t, direction, bytes)

    def send(self, data: bytes, direction: str, now: float) -> Delivery | None:
        self.sent[direction] += 1
        if self.frame_log is not None:
            self.frame_log(now, direction, data)
        delivery = transmit(self.link.for_direction(direction), data, now, self._rng[direction])
        if delivery is None:
            self.dropped[direction] += 1
        return delivery

    def stats(self) -> dict:
        return {
            "uplink_sent": self.sent["up"],
            "uplink_dropped": self.dropped["up"],
            "downlink_sent": self.sent["down"],
            "downlink_dropped": self.dropped["down"],
        }


def format_frame_log_line(t: float, direction: str, data: bytes) -> str:
    """One frame per line: `t=<sim_s> dir=<up|down>` then lowercase hex bytes."""
    hexbytes = " ".join(f"{b:02x}" for b in data)
    return f"t={t:.6f} dir={direction} {hexbytes}"
