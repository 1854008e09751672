import random

import pytest

from hatchsens.gateway import (
    AlreadyAckedError,
    CommandStatus,
    Direction,
    Gateway,
    HatchEstimator,
    IngestStatus,
    InvalidArgumentError,
    NotFoundError,
    Severity,
)
from hatchsens.model import SensorKind, default_thresholds
from hatchsens.persist import MemoryPersister
from hatchsens.radio import (
    GATEWAY_ADDR,
    CommandCode,
    Frame,
    FrameType,
    encode_frame,
)

MID = {
    SensorKind.TEMPERATURE_C: 2500,
    SensorKind.PH: 800,
    SensorKind.O2_MG_L: 720,
    SensorKind.HUMIDITY_PCT: 6000,
    SensorKind.LIGHT_LUX: 500000,
}


def data_frame(kind=SensorKind.PH, seq=0, t=0, centi=800, src=1):
    return encode_frame(
        Frame(FrameType.DATA, src=src, dst=GATEWAY_ADDR, seq=seq,
              kind_or_code=int(kind), timestamp=t, payload=centi)
    )


def make_gateway(downlink=None):
    gw = Gateway(
        default_thresholds(),
        persister=MemoryPersister(),
        publisher=None,
        send_downlink=downlink,
    )
    gw.register_node(1, 60, tuple(SensorKind))
    return gw


class TestIngest:
    def test_accepts_valid_data(self):
        gw = make_gateway()
        result = gw.ingest(data_frame(seq=1, t=60, centi=801), 60.01)
        assert result.status is IngestStatus.ACCEPTED
        assert result.reading.value == 8.01
        assert len(gw.readings) == 1

    def test_duplicate_delivery_stored_once(self):
        gw = make_gateway()
        raw = data_frame(seq=5, t=60)
        first = gw.ingest(raw, 60.01)
        second = gw.ingest(raw, 60.05)
        assert first.status is IngestStatus.ACCEPTED
        assert second.status is IngestStatus.DUPLICATE
        assert len(gw.readings) == 1
        assert gw.nodes[1].duplicates == 1

    def test_duplicate_still_acked(self):
        sent = []
        gw = make_gateway(downlink=lambda frame, at: sent.append(frame))
        raw = data_frame(seq=5, t=60)
        gw.ingest(raw, 60.01)
        gw.ingest(raw, 60.05)
        acks = [f for f in sent if f.ftype is FrameType.ACK]
        assert len(acks) == 2  # the retransmit means the first ack was lost

    def test_corrupt_crc_rejected_and_counted(self):
        gw = make_gateway()
        raw = bytearray(data_frame())
        raw[10] ^= 0x40
        result = gw.ingest(bytes(raw), 1.0)
        assert result.status is IngestStatus.REJECTED
        assert result.reason == "BadCrc"
        assert gw.reject_counters["BadCrc"] == 1
        assert len(gw.readings) == 0

    def test_heartbeat_updates_battery(self):
        gw = make_gateway()
        hb = encode_frame(
            Frame(FrameType.HEARTBEAT, src=1, dst=GATEWAY_ADDR, seq=9, timestamp=0,
                  payload=9980)
        )
        result = gw.ingest(hb, 0.01)
        assert result.status is IngestStatus.HEARTBEAT
        assert gw.nodes[1].battery_centi_pct == 9980  # 99.80 %

    def test_unknown_kind_rejected(self):
        gw = make_gateway()
        raw = encode_frame(
            Frame(FrameType.DATA, src=1, dst=GATEWAY_ADDR, seq=1, kind_or_code=0x77,
                  timestamp=0, payload=0)
        )
        result = gw.ingest(raw, 0.0)
        assert result.status is IngestStatus.REJECTED
        assert result.reason == "UnknownKind"
        assert gw.nodes[1].decode_bad == 1

    def test_fuzz_never_crashes_never_accepts(self):
        gw = make_gateway()
        rng = random.Random(606)
        for _ in range(20_000):
            blob = rng.randbytes(rng.choice((0, 1, 19, 20, 20, 20, 21, 64)))
            result = gw.ingest(blob, 0.0)
            assert result.status is not IngestStatus.ACCEPTED

    def test_queries_return_time_order_despite_late_retransmits(self):
        gw = make_gateway()
        gw.ingest(data_frame(seq=2, t=120), 120.0)
        gw.ingest(data_frame(seq=1, t=60), 121.0)  # stale retransmit lands late
        ts = [r.t for r in gw.query_readings(kind=SensorKind.PH)]
        assert ts == sorted(ts) == [60, 120]

    def test_dedup_soundness_random_duplication(self):
        gw = make_gateway()
        rng = random.Random(17)
        frames = [data_frame(seq=i, t=i, centi=800) for i in range(300)]
        schedule = []
        for raw in frames:
            schedule.extend([raw] * rng.randint(1, 4))
        rng.shuffle(schedule)
        for raw in schedule:
            gw.ingest(raw, 0.0)
        assert len(gw.readings) == len({(r.node_addr, r.seq, r.kind) for r in gw.readings})
        assert len(gw.readings) == 300


class TestAlerts:
    def _feed(self, gw, values, kind=SensorKind.PH, t0=0):
        for i, centi in enumerate(values):
            gw.ingest(data_frame(kind=kind, seq=i + 1, t=t0 + 60 * i, centi=centi), t0 + 60 * i)

    def test_soft_raise_needs_three_consecutive(self):
        gw = make_gateway()
        self._feed(gw, [840, 900, 900, 900])  # 8.4 then three 9.0s
        soft = [a for a in gw.alerts.values() if a.severity is Severity.SOFT]
        assert len(soft) == 1
        assert soft[0].direction is Direction.HIGH
        assert soft[0].raised_t == 180  # the third 9.0

    def test_broken_streak_no_alert(self):
        gw = make_gateway()
        self._feed(gw, [900, 900, 800, 900, 900])
        assert not gw.alerts

    def test_hard_raises_immediately(self):
        gw = make_gateway()
        self._feed(gw, [3600], kind=SensorKind.TEMPERATURE_C)
        hard = [a for a in gw.alerts.values() if a.severity is Severity.HARD]
        assert len(hard) == 1 and hard[0].raised_t == 0

    def test_clear_after_three_in_range(self):
        gw = make_gateway()
        self._feed(gw, [900, 900, 900, 800, 800, 800])
        alert = next(iter(gw.alerts.values()))
        assert not alert.open
        assert alert.cleared_t == 300

    def test_at_most_one_open_per_key(self):
        gw = make_gateway()
        self._feed(gw, [900] * 10)
        soft = [a for a in gw.alerts.values() if a.severity is Severity.SOFT]
        assert len(soft) == 1

    def test_raise_clear_alternates(self):
        gw = make_gateway()
        pattern = [900, 900, 900, 800, 800, 800] * 3
        self._feed(gw, pattern)
        softs = sorted(
            (a for a in gw.alerts.values() if a.severity is Severity.SOFT),
            key=lambda a: a.id,
        )
        assert len(softs) == 3
        for a in softs:
            assert not a.open
            assert a.cleared_t >= a.raised_t

    def test_ack_alert(self):
        gw = make_gateway()
        self._feed(gw, [900, 900, 900])
        alert_id = next(iter(gw.alerts))
        acked = gw.ack_alert(alert_id, "operator-poulami", 200.0)
        assert acked.acked_by == "operator-poulami"
        assert acked.open  # ack is not clear
        with pytest.raises(AlreadyAckedError):
            gw.ack_alert(alert_id, "someone-else", 201.0)

    def test_ack_unknown_id(self):
        gw = make_gateway()
        with pytest.raises(NotFoundError):
            gw.ack_alert(999999, "nobody", 0.0)


class TestSilence:
    def test_silent_after_three_intervals(self):
        gw = make_gateway()
        gw.ingest(data_frame(seq=1, t=0), 0.0)
        gw.detect_silence(180.0)
        assert not any(a.severity is Severity.NODE_SILENT for a in gw.alerts.values())
        gw.detect_silence(181.0)
        silent = [a for a in gw.alerts.values() if a.severity is Severity.NODE_SILENT]
        assert len(silent) == 1 and silent[0].node_addr == 1

    def test_never_heard_is_not_silent(self):
        gw = make_gateway()
        gw.detect_silence(10_000.0)
        assert not gw.alerts

    def test_fresh_frame_clears(self):
        gw = make_gateway()
        gw.ingest(data_frame(seq=1, t=0), 0.0)
        gw.detect_silence(200.0)
        assert any(a.open for a in gw.alerts.values())
        gw.ingest(data_frame(seq=2, t=240), 240.0)
        assert not any(a.open for a in gw.alerts.values())

    def test_commanded_sleep_excluded(self):
        sent = []
        gw = make_gateway(downlink=lambda frame, at: sent.append(frame))
        gw.ingest(data_frame(seq=1, t=0), 0.0)
        gw.dispatch_command(1, CommandCode.SLEEP, 600, 1.0)
        gw.ingest(data_frame(seq=2, t=60), 60.0)  # window: command goes out
        for now in range(61, 660, 60):
            gw.detect_silence(float(now))
        assert not any(a.severity is Severity.NODE_SILENT for a in gw.alerts.values())


class TestCommands:
    def test_unknown_addr(self):
        gw = make_gateway()
        with pytest.raises(NotFoundError):
            gw.dispatch_command(0x00FF, CommandCode.SET_INTERVAL, 30, 0.0)

    def test_invalid_interval(self):
        gw = make_gateway()
        with pytest.raises(InvalidArgumentError):
            gw.dispatch_command(1, CommandCode.SET_INTERVAL, 2, 0.0)
        with pytest.raises(InvalidArgumentError):
            gw.dispatch_command(1, CommandCode.SET_INTERVAL, 4000, 0.0)

    def test_command_sent_on_next_window(self):
        sent = []
        gw = make_gateway(downlink=lambda frame, at: sent.append((frame, at)))
        cmd_id = gw.dispatch_command(1, CommandCode.SET_INTERVAL, 30, 0.0)
        assert gw.commands[cmd_id].status is CommandStatus.PENDING
        assert not [f for f, _ in sent if f.ftype is FrameType.CMD]
        gw.ingest(data_frame(seq=1, t=60), 60.01)
        cmds = [f for f, _ in sent if f.ftype is FrameType.CMD]
        assert len(cmds) == 1
        assert cmds[0].payload == 30 and cmds[0].dst == 1

    def test_one_attempt_per_window(self):
        sent = []
        gw = make_gateway(downlink=lambda frame, at: sent.append(frame))
        gw.dispatch_command(1, CommandCode.SET_INTERVAL, 30, 0.0)
        for seq, kind in enumerate(SensorKind, start=1):
            gw.ingest(data_frame(kind=kind, seq=seq, t=60, centi=MID[kind]), 60.01)
        assert len([f for f in sent if f.ftype is FrameType.CMD]) == 1

    def test_ack_resolves_command(self):
        gw = make_gateway()
        cmd_id = gw.dispatch_command(1, CommandCode.SET_INTERVAL, 30, 0.0)
        gw.ingest(data_frame(seq=1, t=60), 60.01)
        seq = gw.commands[cmd_id].seq
        ack = encode_frame(
            Frame(FrameType.ACK, src=1, dst=GATEWAY_ADDR, seq=seq, timestamp=60, payload=0)
        )
        result = gw.ingest(ack, 60.2)
        assert result.status is IngestStatus.ACK_MATCHED
        assert gw.commands[cmd_id].status is CommandStatus.ACKED
        assert gw.nodes[1].sampling_interval_s == 30

    def test_command_stream_events_keep_their_tag(self):
        events = []
        gw = Gateway(
            default_thresholds(), persister=MemoryPersister(), publisher=events.append
        )
        gw.register_node(1, 60, tuple(SensorKind))
        gw.dispatch_command(1, CommandCode.SET_INTERVAL, 30, 0.0)
        cmd_events = [e for e in events if e["type"] == "command"]
        assert cmd_events and cmd_events[0]["command_type"] == "set_interval"
        assert not [e for e in events if e["type"] == "set_interval"]

    def test_times_out_after_three_windows(self):
        gw = make_gateway(downlink=lambda frame, at: None)
        cmd_id = gw.dispatch_command(1, CommandCode.SET_INTERVAL, 30, 0.0)
        for window in (60, 120, 180, 240):
            gw.ingest(data_frame(seq=window, t=window), window + 0.01)
        cmd = gw.commands[cmd_id]
        assert cmd.status is CommandStatus.TIMED_OUT
        assert cmd.attempts == 3


class TestEstimator:
    def _prime(self, est, t=0):
        est.on_reading(SensorKind.TEMPERATURE_C, 25.0, t)
        est.on_reading(SensorKind.PH, 8.0, t)
        est.on_reading(SensorKind.O2_MG_L, 7.2, t)
        est.on_reading(SensorKind.LIGHT_LUX, 5000.0, t)

    def test_ideal_stream_tracks_time(self):
        est = HatchEstimator(default_thresholds())
        self._prime(est)
        for t in range(60, 86460, 60):
            est.on_reading(SensorKind.PH, 8.0, t)
        assert est.h_est == pytest.approx(0.999, abs=1e-9)
        assert est.first_crossing_t == 86400

    def test_zero_suitability_freezes(self):
        est = HatchEstimator(default_thresholds())
        self._prime(est)
        est.on_reading(SensorKind.LIGHT_LUX, 0.0, 60)  # below hard floor
        before = est.h_est
        assert before == pytest.approx(0.999 * 60 / 86400)  # the one ideal minute
        for t in range(120, 4000, 60):
            est.on_reading(SensorKind.PH, 8.0, t)
        assert est.h_est == before  # frozen while suitability is zero
        est2 = est.estimate(4000.0)
        assert est2.eta_t is None

    def test_incomplete_snapshot_defers(self):
        est = HatchEstimator(default_thresholds())
        est.on_reading(SensorKind.PH, 8.0, 0)
        est.on_reading(SensorKind.PH, 8.0, 600)
        assert est.h_est == 0.0
        assert est.estimate(600.0).last_update_t is None

    def test_monotone_with_stale_timestamps(self):
        est = HatchEstimator(default_thresholds())
        self._prime(est)
        est.on_reading(SensorKind.PH, 8.0, 120)
        h = est.h_est
        est.on_reading(SensorKind.TEMPERATURE_C, 25.0, 60)  # late retransmit
        assert est.h_est == h

    def test_eta_projection(self):
        est = HatchEstimator(default_thresholds())
        self._prime(est)
        est.on_reading(SensorKind.PH, 8.0, 600)
        estimate = est.estimate(600.0)
        # s = 1: eta is now + remaining fraction * nominal time
        expected = 600.0 + (0.999 - est.h_est) * 86400
        assert estimate.eta_t == pytest.approx(expected)

    def test_humidity_ignored(self):
        est = HatchEstimator(default_thresholds())
        assert est.on_reading(SensorKind.HUMIDITY_PCT, 60.0, 0) is False
