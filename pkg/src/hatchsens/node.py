"""Virtual sensor node: wake/sample/transmit/listen/sleep duty cycle, 10-bit
ADC quantization, stop-and-wait retransmission, command handling, and
energy bookkeeping.

A wake cycle is strictly Idle -> Transmit (one burst: carried-over
retransmits, fresh samples, heartbeat, queued command acks) -> Receive
(acks and commands arrive here) -> Sleep.  Frames not acked by the end of
the window are retransmitted in the next cycle's burst, up to the retry
budget; the radio never transmits during the receive window, so command
acks queue for the following burst.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .model import SensorKind, round_half_away
from .radio import (
    GATEWAY_ADDR,
    CommandCode,
    Frame,
    FrameType,
    encode_frame,
)

ADC_MAX = 1023  # 10-bit converter

INTERVAL_MIN_S = 5
INTERVAL_MAX_S = 3600

DEFAULT_CALIBRATION: dict[SensorKind, tuple[float, float]] = {
    SensorKind.TEMPERATURE_C: (0.0, 50.0),
    SensorKind.PH: (0.0, 14.0),
    SensorKind.O2_MG_L: (0.0, 20.0),
    SensorKind.HUMIDITY_PCT: (0.0, 100.0),
    SensorKind.LIGHT_LUX: (0.0, 10000.0),
}


class SensorFaultError(ValueError):
    """The physical input was unreadable (NaN from a broken probe)."""


class RadioState(Enum):
    TRANSMIT = "transmit"
    RECEIVE = "receive"
    IDLE = "idle"
    SLEEP = "sleep"


@dataclass(frozen=True)
class Calibration:
    ranges: dict = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.ranges is None:
            object.__setattr__(self, "ranges", dict(DEFAULT_CALIBRATION))
        for kind, (lo, hi) in self.ranges.items():
            if lo >= hi:
                raise ValueError(f"calibration range for {kind} inverted: [{lo}, {hi}]")

    def range_for(self, kind: SensorKind) -> tuple[float, float]:
        return self.ranges[kind]


@dataclass(frozen=True)
class EnergyModel:
    """Current draw per radio state; 802.15.4-class magnitudes."""

    tx_ma: float = 45.0
    rx_ma: float = 19.0
    idle_ma: float = 2.0
    sleep_ma: float = 0.01
    supply_v: float = 3.3
    capacity_mah: float = 1000.0

    def __post_init__(self):
        if not (self.tx_ma > self.rx_ma > self.idle_ma > self.sleep_ma > 0):
            raise ValueError("expected tx > rx > idle > sleep > 0")

    def current_ma(self, state: RadioState) -> float:
        return {
            RadioState.TRANSMIT: self.tx_ma,
            RadioState.RECEIVE: self.rx_ma,
            RadioState.IDLE: self.idle_ma,
            RadioState.SLEEP: self.sleep_ma,
        }[state]


@dataclass
class NodeParams:
    idle_ms: float = 4.0  # sampling time at wake
    frame_tx_ms: float = 1.0  # on-air time per 20-byte frame
    rx_window_ms: float = 190.0  # listen window after the burst
    ack_timeout_ms: float = 20.0  # informational; window close is the deadline
    retries: int = 3  # retransmissions after the first attempt
    heartbeat_interval_samples: int = 10


def adc_sample(x: float, cal_range: tuple[float, float]) -> int:
    """Quantize an engineering value to ADC counts, clamped to the range."""
    if x != x:  # NaN
        raise SensorFaultError("sensor returned NaN")
    lo, hi = cal_range
    clamped = min(max(x, lo), hi)
    return round_half_away((clamped - lo) / (hi - lo) * ADC_MAX)


def counts_to_centi(counts: int, cal_range: tuple[float, float]) -> int:
    """Reconstruct centi-units from ADC counts (the value put on the wire)."""
    if not (0 <= counts <= ADC_MAX):
        raise ValueError(f"counts out of range: {counts}")
    lo, hi = cal_range
    return round_half_away((lo + counts / ADC_MAX * (hi - lo)) * 100.0)


@dataclass
class _Pending:
    frame: Frame
    attempts: int = 0


@dataclass(frozen=True)
class WakePlan:
    """What the engine must schedule for one wake cycle."""

    transmissions: tuple[tuple[float, bytes], ...]  # (tx start, encoded frame)
    rx_start_t: float
    rx_close_t: float
    window_t: int  # integer cycle timestamp carried in every frame


class SensorNode:
    """One mote in the star; driven entirely by the event scheduler."""

    def __init__(
        self,
        addr: int,
        kinds: tuple[SensorKind, ...],
        sampling_interval_s: int = 60,
        params: NodeParams | None = None,
        calibration: Calibration | None = None,
        energy: EnergyModel | None = None,
        start_t: float = 0.0,
    ):
        if not (0 < addr < 0xFFFF):
            raise ValueError(f"node addr must be in (0x0001, 0xFFFE), got {addr}")
        self.addr = addr
        self.kinds = tuple(kinds)
        self.sampling_interval_s = int(sampling_interval_s)
        self.params = params or NodeParams()
        self.calibration = calibration or Calibration()
        self.energy = energy or EnergyModel()

        self.radio_state = RadioState.SLEEP
        self.next_wake_t = start_t
        self.seq = 0
        self.battery_mah_used = 0.0
        self.dead = False
        self.fault = False

        self._pending: dict[int, _Pending] = {}
        self._ack_queue: list[Frame] = []
        self._sleep_since = start_t
        self._rx_span: tuple[float, float] | None = None
        self._samples_since_hb = self.params.heartbeat_interval_samples

        # stats
        self.samples_taken = 0
        self.tx_attempts = 0
        self.data_acked = 0
        self.frames_expired = 0
        self.state_log: list[tuple[RadioState, float]] = [(RadioState.SLEEP, 0.0)]

    # -- energy ------------------------------------------------------------

    def _accrue(self, state: RadioState, duration_s: float):
        if duration_s <= 0:
            return
        self.battery_mah_used += self.energy.current_ma(state) * duration_s / 3600.0
        last_state, last_dur = self.state_log[-1]
        if last_state is state:
            self.state_log[-1] = (state, last_dur + duration_s)
        else:
            self.state_log.append((state, duration_s))

    def energy_report(self) -> tuple[float, int]:
        """(mAh used, battery remaining in centi-percent, clamped >= 0)."""
        used = self.battery_mah_used
        cap = self.energy.capacity_mah
        pct = round_half_away(100.0 * (cap - used) / cap * 100.0)
        return used, max(0, pct)

    # -- wire helpers --------------------------------------------------------

    def _next_seq(self) -> int:
        s = self.seq
        self.seq = (s + 1) & 0xFFFF
        return s

    def pending_retransmits(self) -> list[tuple[Frame, int]]:
        return [(p.frame, p.attempts) for p in self._pending.values()]

    # -- the duty cycle ------------------------------------------------------

    def wake(self, now: float, observe) -> WakePlan | None:
        """Run one wake: sample, build the burst, plan the receive window.

        `observe(kind) -> float` supplies ground truth.  Returns None when
        called ahead of schedule (nothing happens) or when the battery is
        exhausted (the node goes permanently silent).
        """
        if now < self.next_wake_t:
            return None
        self._accrue(RadioState.SLEEP, now - self._sleep_since)
        self._sleep_since = now
        if self.dead or self.battery_mah_used >= self.energy.capacity_mah:
            self.dead = True
            return None

        window_t = int(now)
        # drop frames that have used up their retry budget
        for seq in [s for s, p in self._pending.items() if p.attempts > self.params.retries]:
            del self._pending[seq]
            self.frames_expired += 1

        self.radio_state = RadioState.IDLE
        idle_s = self.params.idle_ms / 1000.0
        self._accrue(RadioState.IDLE, idle_s)

        for kind in self.kinds:
            try:
                counts = adc_sample(observe(kind), self.calibration.range_for(kind))
            except SensorFaultError:
                self.fault = True
                continue
            centi = counts_to_centi(counts, self.calibration.range_for(kind))
            frame = Frame(
                FrameType.DATA,
                src=self.addr,
                dst=GATEWAY_ADDR,
                seq=self._next_seq(),
                kind_or_code=int(kind),
                timestamp=window_t,
                payload=centi,
            )
            self._pending[frame.seq] = _Pending(frame)
            self.samples_taken += 1
            self._samples_since_hb += 1

        if self._samples_since_hb >= self.params.heartbeat_interval_samples:
            _, pct = self.energy_report()
            hb = Frame(
                FrameType.HEARTBEAT,
                src=self.addr,
                dst=GATEWAY_ADDR,
                seq=self._next_seq(),
                timestamp=window_t,
                payload=-1 if self.fault else pct,
            )
            self._pending[hb.seq] = _Pending(hb)
            self._samples_since_hb = 0

        # command acks lead the burst so the gateway resolves the command
        # before this window tempts it into a redundant re-send
        burst: list[Frame] = list(self._ack_queue)
        self._ack_queue.clear()
        for p in self._pending.values():
            p.attempts += 1
            burst.append(p.frame)

        tx_s = self.params.frame_tx_ms / 1000.0
        tx_start = now + idle_s
        transmissions = tuple(
            (tx_start + i * tx_s, encode_frame(f)) for i, f in enumerate(burst)
        )
        self.tx_attempts += len(burst)
        burst_s = len(burst) * tx_s
        if burst:
            self.radio_state = RadioState.TRANSMIT
            self._accrue(RadioState.TRANSMIT, burst_s)

        rx_start = tx_start + burst_s
        rx_close = rx_start + self.params.rx_window_ms / 1000.0
        self.radio_state = RadioState.RECEIVE
        self._rx_span = (rx_start, rx_close)
        self.next_wake_t = now + self.sampling_interval_s
        return WakePlan(transmissions, rx_start, rx_close, window_t)

    def rx_close(self, now: float) -> float:
        """End the receive window; returns the time of the next wake."""
        rx_start, _ = self._rx_span if self._rx_span else (now, now)
        self._accrue(RadioState.RECEIVE, now - rx_start)
        self._rx_span = None
        self.radio_state = RadioState.SLEEP
        self._sleep_since = now
        return max(self.next_wake_t, now)

    def in_receive_window(self, now: float) -> bool:
        if self._rx_span is None:
            return False
        rx_start, rx_close = self._rx_span
        return rx_start <= now <= rx_close

    def on_downlink(self, frame: Frame, now: float) -> bool:
        """Handle a frame arriving from the gateway; True if it was heard.

        Anything arriving while the radio is not listening is lost.
        """
        if not self.in_receive_window(now):
            return False
        if frame.dst not in (self.addr, 0xFFFF):
            return False
        if frame.ftype is FrameType.ACK:
            pending = self._pending.pop(frame.seq, None)
            if pending is not None and pending.frame.ftype is FrameType.DATA:
                self.data_acked += 1
            return True
        if frame.ftype is FrameType.CMD:
            self._ack_queue.append(self.handle_command(frame, now))
            return True
        return False

    def handle_command(self, cmd: Frame, now: float) -> Frame:
        """Apply a control command and produce the echoing ack."""
        error = False
        if cmd.kind_or_code == CommandCode.SET_INTERVAL:
            # takes effect from the next wake; the running timer completes
            self.sampling_interval_s = max(INTERVAL_MIN_S, min(INTERVAL_MAX_S, int(cmd.payload)))
        elif cmd.kind_or_code == CommandCode.SLEEP:
            self.next_wake_t = now + max(0, int(cmd.payload))
        elif cmd.kind_or_code == CommandCode.WAKE:
            self.next_wake_t = now
        else:
            error = True
        return Frame(
            FrameType.ACK,
            src=self.addr,
            dst=GATEWAY_ADDR,
            seq=cmd.seq,
            timestamp=int(now),
            payload=-1 if error else 0,
        )
