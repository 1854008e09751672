"""The star-network hub: validates and deduplicates incoming frames, keeps
the reading store, runs threshold alerting with hysteresis, estimates hatch
progress from observed data, relays operator commands to nodes, and feeds
the persistence layer and the live event stream.

All mutation happens on the simulation event loop (single writer); readers
take snapshots.  Ingest never raises on hostile bytes: every failure is a
counted Rejected outcome.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .model import (
    HATCH_COMPLETE,
    Classification,
    HatchThresholds,
    Reading,
    SensorKind,
    REQUIRED_KINDS,
    classify,
    suitability,
)
from .radio import (
    GATEWAY_ADDR,
    CommandCode,
    Frame,
    FrameError,
    FrameType,
    decode_frame,
)

HATCH_DONE = HATCH_COMPLETE  # h_est level treated as "fully hatched"

DEDUP_WINDOW = 1024  # per-node sliding window of recent seqs
SOFT_RAISE_N = 3  # consecutive out-of-soft samples to raise a soft alert
CLEAR_M = 3  # consecutive in-range samples to clear
SILENCE_FACTOR = 3  # silent after this many sampling intervals without contact
ETA_TRAILING_S = 1800  # suitability averaging window for the ETA projection


class NotFoundError(KeyError):
    pass


class AlreadyAckedError(ValueError):
    pass


class InvalidArgumentError(ValueError):
    pass


class IngestStatus(Enum):
    ACCEPTED = "accepted"
    ACK_MATCHED = "ack_matched"
    HEARTBEAT = "heartbeat"
    DUPLICATE = "duplicate"
    REJECTED = "rejected"


@dataclass(frozen=True)
class IngestResult:
    status: IngestStatus
    reading: Reading | None = None
    reason: str | None = None


class Severity(Enum):
    SOFT = "soft"
    HARD = "hard"
    NODE_SILENT = "node_silent"


class Direction(Enum):
    LOW = "low"
    HIGH = "high"
    NONE = "none"


@dataclass
class AlertEvent:
    id: int
    severity: Severity
    direction: Direction
    raised_t: int
    kind: SensorKind | None = None
    node_addr: int | None = None  # for silence alerts
    value: float | None = None
    cleared_t: int | None = None
    acked_by: str | None = None
    acked_t: int | None = None

    @property
    def open(self) -> bool:
        return self.cleared_t is None

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "severity": self.severity.value,
            "direction": self.direction.value,
            "kind": self.kind.key if self.kind else None,
            "node": self.node_addr,
            "value": self.value,
            "raised_t": self.raised_t,
            "cleared_t": self.cleared_t,
            "acked_by": self.acked_by,
            "acked_t": self.acked_t,
            "open": self.open,
        }


class CommandStatus(Enum):
    PENDING = "pending"
    ACKED = "acked"
    TIMED_OUT = "timed_out"


@dataclass
class PendingCommand:
    id: int
    addr: int
    code: CommandCode
    value: int
    seq: int
    dispatched_t: float
    status: CommandStatus = CommandStatus.PENDING
    attempts: int = 0
    last_window: int | None = None
    resolved_t: float | None = None

    def as_dict(self) -> dict:
        return {
            "command_id": self.id,
            "addr": self.addr,
            "type": self.code.name.lower(),
            "value": self.value,
            "status": self.status.value,
            "attempts": self.attempts,
            "dispatched_t": self.dispatched_t,
            "resolved_t": self.resolved_t,
        }


@dataclass
class NodeEntry:
    addr: int
    sampling_interval_s: int = 60
    kinds: tuple = ()
    last_contact_t: int | None = None  # newest frame timestamp seen
    last_arrival_t: float | None = None
    battery_centi_pct: int | None = None
    fault: bool = False
    frames_ok: int = 0
    duplicates: int = 0
    crc_bad: int = 0
    decode_bad: int = 0
    commanded_sleep_until: float | None = None

    def inferred_state(self, now: float, silent: bool) -> str:
        if silent:
            return "silent"
        if self.commanded_sleep_until is not None and now < self.commanded_sleep_until:
            return "sleeping"
        if self.last_contact_t is not None and now - self.last_contact_t <= (
            self.sampling_interval_s + 1
        ):
            return "active"
        return "sleeping"

    def as_dict(self, now: float, silent: bool) -> dict:
        return {
            "addr": self.addr,
            "sampling_interval_s": self.sampling_interval_s,
            "kinds": [k.key for k in self.kinds],
            "last_contact_t": self.last_contact_t,
            "battery_centi_pct": self.battery_centi_pct,
            "fault": self.fault,
            "state": self.inferred_state(now, silent),
            "counters": {
                "ok": self.frames_ok,
                "duplicate": self.duplicates,
                "crc_bad": self.crc_bad,
                "decode_bad": self.decode_bad,
            },
        }


@dataclass(frozen=True)
class HatchEstimate:
    h_est: float
    eta_t: float | None
    last_update_t: int | None
    first_crossing_t: int | None

    def as_dict(self) -> dict:
        return {
            "h_est": self.h_est,
            "eta_t": self.eta_t,
            "last_update_t": self.last_update_t,
            "first_crossing_t": self.first_crossing_t,
        }


class HatchEstimator:
    """Integrates suitability over the observed reading stream.

    Zero-order hold: the latest value per kind stands until the next one
    arrives.  Integration starts once every required kind has reported and
    only ever moves forward, so h_est is monotone even when retransmitted
    frames arrive with stale timestamps.
    """

    def __init__(self, thresholds: HatchThresholds):
        self.thresholds = thresholds
        self._snapshot: dict[SensorKind, float] = {}
        self._kind_t: dict[SensorKind, int] = {}
        self._t_last: int | None = None
        self.h_est = 0.0
        self.first_crossing_t: int | None = None
        self._recent: deque[tuple[int, float]] = deque()

    def on_reading(self, kind: SensorKind, value: float, t: int) -> bool:
        """Feed one reading; returns True when h_est advanced."""
        if kind not in REQUIRED_KINDS:
            return False
        advanced = False
        if len(self._snapshot) == len(REQUIRED_KINDS) and self._t_last is not None:
            if t > self._t_last:
                s = suitability(self._snapshot, self.thresholds)
                self.h_est = min(
                    1.0,
                    self.h_est
                    + s * HATCH_COMPLETE * (t - self._t_last) / self.thresholds.t_hatch_s,
                )
                self._recent.append((t, s))
                self._t_last = t
                advanced = True
                if self.first_crossing_t is None and self.h_est >= HATCH_DONE:
                    self.first_crossing_t = t
        if kind not in self._kind_t or t >= self._kind_t[kind]:
            self._snapshot[kind] = value
            self._kind_t[kind] = t
        if self._t_last is None and len(self._snapshot) == len(REQUIRED_KINDS):
            self._t_last = t  # integration starts at the completing reading
        return advanced

    def estimate(self, now: float) -> HatchEstimate:
        while self._recent and self._recent[0][0] < now - ETA_TRAILING_S:
            self._recent.popleft()
        eta = None
        if self.first_crossing_t is not None:
            eta = float(self.first_crossing_t)
        elif self._recent:
            s_recent = sum(s for _, s in self._recent) / len(self._recent)
            if s_recent > 0.0:
                eta = now + (HATCH_DONE - self.h_est) * self.thresholds.t_hatch_s / s_recent
        return HatchEstimate(self.h_est, eta, self._t_last, self.first_crossing_t)


class _KindStreaks:
    __slots__ = ("out_direction", "out_count", "in_count")

    def __init__(self):
        self.out_direction: Direction | None = None
        self.out_count = 0
        self.in_count = 0


class Gateway:
    """Single-writer hub state; the event loop is the only mutator."""

    def __init__(
        self,
        thresholds: HatchThresholds,
        persister=None,
        publisher=None,
        send_downlink=None,
        ack_delay_ms: float = 8.0,
    ):
        self.thresholds = thresholds
        self.persister = persister
        self.publisher = publisher
        self.send_downlink = send_downlink  # callable(frame, at_sim_t)
        self.ack_delay_s = ack_delay_ms / 1000.0

        self.readings: list[Reading] = []
        self.alerts: dict[int, AlertEvent] = {}
        self._open_alerts: dict[tuple, int] = {}  # (kind|addr, direction, severity) -> id
        self._alert_seq = 0
        self._streaks: dict[SensorKind, _KindStreaks] = {}

        self.nodes: dict[int, NodeEntry] = {}
        self._dedup_seen: dict[int, set] = {}
        self._dedup_order: dict[int, deque] = {}

        self.estimator = HatchEstimator(thresholds)
        self.commands: dict[int, PendingCommand] = {}
        self._command_seq = 0
        self._gateway_seq = 0

        self.reject_counters: dict[str, int] = {}
        self.accepted = 0
        self.kind_last_t: dict[SensorKind, int] = {}

    # -- plumbing ------------------------------------------------------------

    def _publish(self, event: dict):
        if self.publisher is not None:
            self.publisher(event)

    def _publish_command(self, cmd: "PendingCommand"):
        # as_dict carries its own "type" (the command name), which must not
        # clobber the stream event tag
        event = cmd.as_dict()
        event["command_type"] = event.pop("type")
        event["type"] = "command"
        self._publish(event)

    def _persist(self, channel: str, record: dict):
        if self.persister is not None:
            getattr(self.persister, channel)(record)

    def set_thresholds(self, thresholds: HatchThresholds):
        self.thresholds = thresholds
        self.estimator.thresholds = thresholds

    def register_node(self, addr: int, sampling_interval_s: int, kinds: tuple):
        self.nodes[addr] = NodeEntry(
            addr=addr, sampling_interval_s=int(sampling_interval_s), kinds=tuple(kinds)
        )
        self._dedup_seen[addr] = set()
        self._dedup_order[addr] = deque()

    def _entry(self, addr: int) -> NodeEntry:
        if addr not in self.nodes:
            self.register_node(addr, 60, ())
        return self.nodes[addr]

    # -- ingest ----------------------------------------------------------------

    def ingest(self, data: bytes, now: float) -> IngestResult:
        try:
            frame = decode_frame(bytes(data))
        except FrameError as err:
            reason = type(err).__name__
            self.reject_counters[reason] = self.reject_counters.get(reason, 0) + 1
            return IngestResult(IngestStatus.REJECTED, reason=reason)
        if frame.dst != GATEWAY_ADDR:
            return self._reject("WrongDst")
        if frame.ftype is FrameType.ACK:
            return self._ingest_ack(frame, now)
        if frame.ftype is FrameType.CMD:
            return self._reject("UnexpectedCmd")
        entry = self._entry(frame.src)
        if self._is_duplicate(frame.src, frame.seq):
            entry.duplicates += 1
            self._touch(entry, frame, now)
            self._ack(frame, now)  # the first ack was evidently lost
            return IngestResult(IngestStatus.DUPLICATE)
        if frame.ftype is FrameType.DATA:
            return self._ingest_data(frame, entry, now)
        return self._ingest_heartbeat(frame, entry, now)

    def _reject(self, reason: str) -> IngestResult:
        self.reject_counters[reason] = self.reject_counters.get(reason, 0) + 1
        return IngestResult(IngestStatus.REJECTED, reason=reason)

    def _is_duplicate(self, addr: int, seq: int) -> bool:
        seen = self._dedup_seen[addr]
        if seq in seen:
            return True
        order = self._dedup_order[addr]
        seen.add(seq)
        order.append(seq)
        if len(order) > DEDUP_WINDOW:
            seen.discard(order.popleft())
        return False

    def _touch(self, entry: NodeEntry, frame: Frame, now: float):
        entry.last_arrival_t = now
        if entry.last_contact_t is None or frame.timestamp > entry.last_contact_t:
            entry.last_contact_t = frame.timestamp
        # clear against the frame's own timestamp so a replay of the reading
        # log reproduces the same transition times
        self._clear_silence(entry, frame.timestamp)
        self._pump_commands(entry, frame.timestamp, now)

    def _ack(self, frame: Frame, now: float):
        if self.send_downlink is None:
            return
        ack = Frame(
            FrameType.ACK,
            src=GATEWAY_ADDR,
            dst=frame.src,
            seq=frame.seq,
            timestamp=int(now),
        )
        self.send_downlink(ack, now + self.ack_delay_s)

    def _ingest_data(self, frame: Frame, entry: NodeEntry, now: float) -> IngestResult:
        try:
            kind = SensorKind(frame.kind_or_code)
        except ValueError:
            entry.decode_bad += 1
            return self._reject("UnknownKind")
        entry.frames_ok += 1
        reading = Reading(frame.src, kind, frame.seq, frame.timestamp, frame.payload)
        self.readings.append(reading)
        self.accepted += 1
        if reading.t >= self.kind_last_t.get(kind, -1):
            self.kind_last_t[kind] = reading.t
        self._persist(
            "reading",
            {
                "t": reading.t,
                "node": reading.node_addr,
                "kind": kind.key,
                "seq": reading.seq,
                "centi": reading.centi,
                "value": reading.value,
            },
        )
        self._touch(entry, frame, now)
        self._ack(frame, now)
        cls = self.evaluate(reading)
        if self.estimator.on_reading(kind, reading.value, reading.t):
            est = self.estimator.estimate(now)
            self._publish({"type": "hatch", "t": reading.t, **est.as_dict()})
        self._publish(
            {
                "type": "reading",
                "t": reading.t,
                "node": reading.node_addr,
                "kind": kind.key,
                "value": reading.value,
                "seq": reading.seq,
                "classification": cls.value if cls else None,
            }
        )
        return IngestResult(IngestStatus.ACCEPTED, reading=reading)

    def _ingest_heartbeat(self, frame: Frame, entry: NodeEntry, now: float) -> IngestResult:
        entry.frames_ok += 1
        if frame.payload < 0:
            entry.fault = True
        else:
            entry.battery_centi_pct = frame.payload
        self._touch(entry, frame, now)
        self._ack(frame, now)
        self._publish({"type": "node", "t": frame.timestamp, **entry.as_dict(now, False)})
        return IngestResult(IngestStatus.HEARTBEAT)

    def _ingest_ack(self, frame: Frame, now: float) -> IngestResult:
        for cmd in self.commands.values():
            if (
                cmd.status is CommandStatus.PENDING
                and cmd.addr == frame.src
                and cmd.seq == frame.seq
            ):
                cmd.status = CommandStatus.ACKED
                cmd.resolved_t = now
                if cmd.code is CommandCode.SET_INTERVAL and frame.payload >= 0:
                    self._entry(cmd.addr).sampling_interval_s = cmd.value
                self._persist("command", {"event": "acked", "t": now, **cmd.as_dict()})
                self._publish_command(cmd)
                return IngestResult(IngestStatus.ACK_MATCHED)
        return self._reject("UnmatchedAck")

    # -- alert engine ----------------------------------------------------------

    def evaluate(self, reading: Reading) -> Classification | None:
        """Classify one reading and walk the per-kind alert state machine."""
        band = self.thresholds.band_for(reading.kind)
        if band is None:
            return None
        cls = classify(reading.value, band)
        streaks = self._streaks.setdefault(reading.kind, _KindStreaks())
        if cls is Classification.IN_RANGE:
            streaks.out_direction = None
            streaks.out_count = 0
            streaks.in_count += 1
            if streaks.in_count >= CLEAR_M:
                self._clear_kind_alerts(reading.kind, reading.t)
            return cls
        direction = (
            Direction.LOW
            if cls in (Classification.LOW_SOFT, Classification.LOW_HARD)
            else Direction.HIGH
        )
        streaks.in_count = 0
        if streaks.out_direction is direction:
            streaks.out_count += 1
        else:
            streaks.out_direction = direction
            streaks.out_count = 1
        if cls in (Classification.LOW_HARD, Classification.HIGH_HARD):
            self._raise_alert(
                Severity.HARD, direction, reading.t, kind=reading.kind, value=reading.value
            )
        if streaks.out_count >= SOFT_RAISE_N:
            self._raise_alert(
                Severity.SOFT, direction, reading.t, kind=reading.kind, value=reading.value
            )
        return cls

    def _alert_key(self, severity, direction, kind, node_addr):
        return (kind, node_addr, direction, severity)

    def _raise_alert(self, severity, direction, t, kind=None, node_addr=None, value=None):
        key = self._alert_key(severity, direction, kind, node_addr)
        if key in self._open_alerts:
            return
        self._alert_seq += 1
        alert = AlertEvent(
            id=self._alert_seq,
            severity=severity,
            direction=direction,
            raised_t=int(t),
            kind=kind,
            node_addr=node_addr,
            value=value,
        )
        self.alerts[alert.id] = alert
        self._open_alerts[key] = alert.id
        self._persist(
            "alert",
            {
                "event": "raise",
                "id": alert.id,
                "severity": severity.value,
                "direction": direction.value,
                "kind": kind.key if kind else None,
                "node": node_addr,
                "value": value,
                "t": int(t),
            },
        )
        self._publish({"type": "alert", "event": "raise", **alert.as_dict()})

    def _clear_alert(self, alert: AlertEvent, t):
        alert.cleared_t = max(int(t), alert.raised_t)
        key = self._alert_key(alert.severity, alert.direction, alert.kind, alert.node_addr)
        self._open_alerts.pop(key, None)
        self._persist("alert", {"event": "clear", "id": alert.id, "t": alert.cleared_t})
        self._publish({"type": "alert", "event": "clear", **alert.as_dict()})

    def _clear_kind_alerts(self, kind: SensorKind, t):
        for key, alert_id in list(self._open_alerts.items()):
            if key[0] is kind:
                self._clear_alert(self.alerts[alert_id], t)

    def ack_alert(self, alert_id: int, who: str, now: float) -> AlertEvent:
        alert = self.alerts.get(alert_id)
        if alert is None:
            raise NotFoundError(f"no alert {alert_id}")
        if alert.acked_by is not None:
            raise AlreadyAckedError(f"alert {alert_id} already acked by {alert.acked_by}")
        alert.acked_by = who
        alert.acked_t = int(now)
        self._persist(
            "alert", {"event": "ack", "id": alert.id, "t": alert.acked_t, "who": who}
        )
        self._publish({"type": "alert", "event": "ack", **alert.as_dict()})
        return alert

    # -- node silence ----------------------------------------------------------

    def detect_silence(self, now: float):
        """1 Hz check: raise NodeSilent after 3 quiet sampling intervals,
        clear on fresh contact; commanded sleep windows are excluded."""
        for addr, entry in self.nodes.items():
            if entry.last_contact_t is None:
                continue  # never heard; setup problem, not silence
            if entry.commanded_sleep_until is not None and now < entry.commanded_sleep_until:
                continue
            quiet = now - entry.last_contact_t
            if quiet > SILENCE_FACTOR * entry.sampling_interval_s:
                self._raise_alert(
                    Severity.NODE_SILENT, Direction.NONE, now, node_addr=addr
                )

    def _clear_silence(self, entry: NodeEntry, now: float):
        key = self._alert_key(Severity.NODE_SILENT, Direction.NONE, None, entry.addr)
        alert_id = self._open_alerts.get(key)
        if alert_id is not None:
            self._clear_alert(self.alerts[alert_id], int(now))

    # -- command dispatch --------------------------------------------------------

    def dispatch_command(self, addr: int, code: CommandCode, value: int, now: float) -> int:
        if addr not in self.nodes:
            raise NotFoundError(f"node 0x{addr:04x} not registered")
        value = int(value)
        if code is CommandCode.SET_INTERVAL and not (5 <= value <= 3600):
            raise InvalidArgumentError(f"interval {value} outside [5, 3600] s")
        if code is CommandCode.SLEEP and value < 0:
            raise InvalidArgumentError(f"sleep duration {value} negative")
        self._command_seq += 1
        self._gateway_seq = (self._gateway_seq + 1) & 0xFFFF
        cmd = PendingCommand(
            id=self._command_seq,
            addr=addr,
            code=code,
            value=value,
            seq=self._gateway_seq,
            dispatched_t=now,
        )
        self.commands[cmd.id] = cmd
        self._persist("command", {"event": "dispatched", "t": now, **cmd.as_dict()})
        self._publish_command(cmd)
        return cmd.id

    def _pump_commands(self, entry: NodeEntry, window_t: int, now: float):
        """Called per valid frame: each wake window is one send opportunity."""
        for cmd in self.commands.values():
            if cmd.status is not CommandStatus.PENDING or cmd.addr != entry.addr:
                continue
            if cmd.last_window == window_t:
                continue
            if cmd.attempts >= 3:
                cmd.status = CommandStatus.TIMED_OUT
                cmd.resolved_t = now
                self._persist("command", {"event": "timed_out", "t": now, **cmd.as_dict()})
                self._publish_command(cmd)
                continue
            cmd.attempts += 1
            cmd.last_window = window_t
            if cmd.code is CommandCode.SLEEP:
                entry.commanded_sleep_until = (
                    now + cmd.value + entry.sampling_interval_s
                )
            if self.send_downlink is not None:
                frame = Frame(
                    FrameType.CMD,
                    src=GATEWAY_ADDR,
                    dst=cmd.addr,
                    seq=cmd.seq,
                    kind_or_code=int(cmd.code),
                    timestamp=int(now),
                    payload=cmd.value,
                )
                self.send_downlink(frame, now + self.ack_delay_s)
            self._persist("command", {"event": "attempt", "t": now, **cmd.as_dict()})

    # -- queries -------------------------------------------------------------

    def hatch(self, now: float) -> HatchEstimate:
        return self.estimator.estimate(now)

    def query_readings(self, kind=None, node=None, t_from=None, t_to=None) -> list[Reading]:
        out = []
        for r in self.readings:
            if kind is not None and r.kind is not kind:
                continue
            if node is not None and r.node_addr != node:
                continue
            if t_from is not None and r.t < t_from:
                continue
            if t_to is not None and r.t > t_to:
                continue
            out.append(r)
        # late retransmits append out of order; consumers see time order
        out.sort(key=lambda r: (r.t, r.node_addr, r.seq))
        return out

    def list_alerts(self, open_only: bool | None = None) -> list[AlertEvent]:
        alerts = list(self.alerts.values())
        if open_only is True:
            alerts = [a for a in alerts if a.open]
        elif open_only is False:
            alerts = [a for a in alerts if not a.open]
        return alerts

    def node_snapshot(self, now: float) -> list[dict]:
        out = []
        for addr in sorted(self.nodes):
            entry = self.nodes[addr]
            key = self._alert_key(Severity.NODE_SILENT, Direction.NONE, None, addr)
            out.append(entry.as_dict(now, silent=key in self._open_alerts))
        return out
