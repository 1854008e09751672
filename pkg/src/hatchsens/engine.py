"""Discrete-event simulation engine.

One priority queue drives everything: plant integration steps and 1 Hz
housekeeping at integer seconds, node wake cycles, per-frame radio
transmissions and deliveries at millisecond resolution.  Ties at one
timestamp resolve by a fixed priority (plant physics first, housekeeping
last) then insertion order, so a run is a pure function of (config, seed).

Batch mode drains the queue as fast as possible and auto-confirms operator
gates from the config attestations.  Live mode paces the same queue against
wall clock (sim seconds = accel x wall seconds) and applies operator
requests, which arrive through a thread-safe inbox, between event batches.
"""

from __future__ import annotations

import datetime
import heapq
import queue
import threading
import time
from dataclasses import dataclass, replace

from . import rng
from .config import RunConfig
from .gateway import Gateway
from .lifecycle import GateBlockedError, GateEvidence, Lifecycle, RunPhase
from .model import HATCH_COMPLETE, SensorKind, validate_culture
from .node import SensorNode
from .persist import MemoryPersister, RunPersister
from .plant import Actuator, observe, preset, set_actuator, step
from .radio import FrameError, Medium, decode_frame, encode_frame

# event priorities at equal timestamps
_P_PLANT = 0
_P_ACTUATOR = 1
_P_TX = 2
_P_DELIVER = 3
_P_WAKE = 4
_P_RXCLOSE = 5
_P_HOUSE = 9

FRESH_WINDOW_S = 300  # "recent reading" horizon for the monitoring gate

MANIFEST_SCHEMA = "hatchsens-run-v1"

RADIO_METADATA = {
    "network_protocol": "802.15.4",
    "ism_bands_mhz": [900.0, 2400.0, 5800.0],
}


@dataclass
class RunResult:
    exit_code: int
    final_phase: RunPhase
    sim_t: float
    blockers: list[str]


class _Future:
    """Tiny one-shot result holder for cross-thread operator requests."""

    def __init__(self):
        self._event = threading.Event()
        self._value = None
        self._error = None

    def set(self, value=None, error=None):
        self._value, self._error = value, error
        self._event.set()

    def result(self, timeout: float = 2.0):
        if not self._event.wait(timeout):
            raise TimeoutError("simulation loop did not respond")
        if self._error is not None:
            raise self._error
        return self._value


class Simulation:
    def __init__(self, cfg: RunConfig, out_dir=None, publisher=None):
        self.cfg = cfg
        self.publisher = publisher
        pre = preset(cfg.plant_preset, thresholds=cfg.thresholds)
        params = pre.params
        if cfg.plant_overrides:
            params = replace(params, **cfg.plant_overrides)
        self.plant_params = params
        self.plant_state = pre.state
        if not cfg.aerator_attested:
            self.plant_state = set_actuator(self.plant_state, Actuator.AERATOR, False)

        self.rng_plant = rng.stream(cfg.seed, "plant")
        self.medium = Medium(
            cfg.link, rng.stream(cfg.seed, "link.up"), rng.stream(cfg.seed, "link.down")
        )
        if out_dir is not None:
            self.persister = RunPersister(out_dir, log_frames=cfg.log_frames)
        else:
            self.persister = MemoryPersister()
        self.medium.frame_log = self.persister.frame

        self.gateway = Gateway(
            cfg.thresholds,
            persister=self.persister,
            publisher=publisher,
            send_downlink=self._queue_downlink,
            ack_delay_ms=cfg.ack_delay_ms,
        )
        self.lifecycle = Lifecycle(self.persister, publisher)
        self.nodes: dict[int, SensorNode] = {}
        for nc in cfg.nodes:
            node = SensorNode(
                nc.addr,
                nc.kinds,
                sampling_interval_s=nc.sampling_interval_s,
                params=nc.params,
                calibration=nc.calibration,
                energy=nc.energy,
            )
            self.nodes[nc.addr] = node
            self.gateway.register_node(nc.addr, nc.sampling_interval_s, nc.kinds)

        self.now = 0.0
        self.hatch_start_t = 0.0  # cysts enter the water at the run epoch
        self.h_true_crossing_t: float | None = None
        self.auto_advance = cfg.mode == "batch"
        self.operator_stop = False
        self.done = False
        self._exit_code = 0
        self._blockers: list[str] = []

        self._heap: list = []
        self._tie = 0
        self._inbox: queue.SimpleQueue = queue.SimpleQueue()
        self.lock = threading.RLock()

        self._schedule(self.plant_params.dt_s, _P_PLANT, "plant", None)
        self._schedule(0.0, _P_HOUSE, "housekeep", None)
        for node in self.nodes.values():
            self._schedule(node.next_wake_t, _P_WAKE, "wake", node)
        for t, actuator, value in pre.schedule:
            self._schedule(t, _P_ACTUATOR, "actuator", (actuator, value))

    # -- scheduling ------------------------------------------------------------

    def _schedule(self, t: float, prio: int, kind: str, data):
        heapq.heappush(self._heap, (t, prio, self._tie, kind, data))
        self._tie += 1

    def _queue_downlink(self, frame, at: float):
        self._schedule(at, _P_TX, "txdown", frame)

    def _observe(self, kind: SensorKind) -> float:
        return observe(self.plant_state, kind)

    # -- event handlers ----------------------------------------------------------

    def _process(self, t: float, kind: str, data):
        self.now = t
        if kind == "plant":
            self.plant_state = step(self.plant_state, self.plant_params, self.rng_plant)
            if (
                self.h_true_crossing_t is None
                and self.plant_state.hatch_fraction >= HATCH_COMPLETE
            ):
                self.h_true_crossing_t = self.plant_state.t
            self._schedule(t + self.plant_params.dt_s, _P_PLANT, "plant", None)
        elif kind == "actuator":
            actuator, value = data
            self.plant_state = set_actuator(self.plant_state, actuator, value)
        elif kind == "wake":
            plan = data.wake(t, self._observe)
            if plan is None:
                return  # battery exhausted: permanently silent
            for tx_t, frame_bytes in plan.transmissions:
                self._schedule(tx_t, _P_TX, "txup", frame_bytes)
            self._schedule(plan.rx_close_t, _P_RXCLOSE, "rxclose", data)
        elif kind == "txup":
            delivery = self.medium.send(data, "up", t)
            if delivery is not None:
                self._schedule(delivery.arrive_t, _P_DELIVER, "deliver_up", delivery.data)
        elif kind == "txdown":
            delivery = self.medium.send(encode_frame(data), "down", t)
            if delivery is not None:
                self._schedule(delivery.arrive_t, _P_DELIVER, "deliver_down", delivery.data)
        elif kind == "deliver_up":
            self.gateway.ingest(data, t)
        elif kind == "deliver_down":
            try:
                frame = decode_frame(data)
            except FrameError:
                return  # corrupted in flight; the node's radio rejects it
            node = self.nodes.get(frame.dst)
            if node is not None:
                node.on_downlink(frame, t)
        elif kind == "rxclose":
            next_wake = data.rx_close(t)
            self._schedule(next_wake, _P_WAKE, "wake", data)
        elif kind == "housekeep":
            self.gateway.detect_silence(t)
            if self.auto_advance:
                self._advance_ready_gates(t)
            else:
                self._auto_finish_monitoring(t)
            self.lifecycle.feeding_check(t, self.hatch_start_t, self.gateway.thresholds)
            self._check_finished(t)
            if not self.done:
                self._schedule(t + 1.0, _P_HOUSE, "housekeep", None)

    # -- gates -------------------------------------------------------------------

    def gate_evidence(self, now: float) -> GateEvidence:
        culture = validate_culture(self.cfg.culture, self.gateway.thresholds)
        node_ready = any(
            set(e.kinds) >= set(SensorKind) and e.battery_centi_pct is not None
            for e in self.gateway.nodes.values()
        )
        fresh = {
            k for k, t in self.gateway.kind_last_t.items() if now - t <= FRESH_WINDOW_S
        }
        return GateEvidence(
            culture=culture,
            aerator_on=self.plant_state.aerator_on,
            node_ready=node_ready,
            fresh_kinds=fresh,
            h_est=self.gateway.estimator.h_est,
            now=now,
            max_duration_s=self.cfg.max_duration_s,
            operator_stop=self.operator_stop,
        )

    def _advance_ready_gates(self, now: float):
        while self.lifecycle.phase is not RunPhase.ANALYSIS:
            ev = self.gate_evidence(now)
            if self.lifecycle.blockers(ev):
                break
            self.lifecycle.advance(ev, now)

    def _auto_finish_monitoring(self, now: float):
        # even under operator-driven phasing, a finished culture (or the
        # duration cap, or a stop request) closes out the run by itself
        if self.lifecycle.phase is RunPhase.MONITORING:
            ev = self.gate_evidence(now)
            if not self.lifecycle.blockers(ev):
                self.lifecycle.advance(ev, now)

    def _check_finished(self, now: float):
        if self.lifecycle.phase is RunPhase.ANALYSIS:
            self._finish(0, now)
            return
        if now >= self.cfg.max_duration_s:
            self._blockers = self.lifecycle.blockers(self.gate_evidence(now))
            self._finish(3, now)
            return
        if self.operator_stop:
            # a stop before monitoring cannot reach analysis: hard abort
            self._blockers = self.lifecycle.blockers(self.gate_evidence(now))
            self._finish(3, now)
            return
        if self.cfg.mode == "batch" and self.lifecycle.phase in (
            RunPhase.CULTURE_PREP,
            RunPhase.AERATION_ON,
        ):
            # these gates are pure config in batch mode; if blocked now they
            # are blocked forever
            reasons = self.lifecycle.blockers(self.gate_evidence(now))
            if reasons:
                self._blockers = reasons
                self._finish(3, now)

    def _finish(self, exit_code: int, now: float):
        self.done = True
        self._exit_code = exit_code

    # -- run loops ---------------------------------------------------------------

    def run_until(self, t_target: float):
        """Process every event at or before t_target (or until the run ends)."""
        while self._heap and not self.done and self._heap[0][0] <= t_target:
            t, _prio, _tie, kind, data = heapq.heappop(self._heap)
            self._process(t, kind, data)

    def run_batch(self) -> RunResult:
        self._write_manifest(initial=True)
        while self._heap and not self.done:
            t, _prio, _tie, kind, data = heapq.heappop(self._heap)
            self._process(t, kind, data)
        return self._finalize()

    def run_live(self, stop_event: threading.Event | None = None) -> RunResult:
        self._write_manifest(initial=True)
        accel = self.cfg.accel
        wall0 = time.monotonic()
        while not self.done and (stop_event is None or not stop_event.is_set()):
            target = (time.monotonic() - wall0) * accel
            with self.lock:
                self._drain_inbox()
                self.run_until(target)
            time.sleep(0.02)
        with self.lock:
            return self._finalize()

    def _drain_inbox(self):
        while True:
            try:
                fn, future = self._inbox.get_nowait()
            except queue.Empty:
                return
            try:
                future.set(value=fn(self.now))
            except Exception as err:  # surfaced to the API caller
                future.set(error=err)

    def call_on_loop(self, fn) -> _Future:
        """Run `fn(now)` on the simulation loop; returns a waitable future."""
        future = _Future()
        self._inbox.put((fn, future))
        return future

    # -- finalization ----------------------------------------------------------

    def _node_summary(self) -> dict:
        out = {}
        for addr in sorted(self.nodes):
            node = self.nodes[addr]
            used, pct = node.energy_report()
            entry = self.gateway.nodes.get(addr)
            out[str(addr)] = {
                "energy_mah": used,
                "battery_centi_pct": pct,
                "samples_sent": node.samples_taken,
                "tx_attempts": node.tx_attempts,
                "data_acked": node.data_acked,
                "lost": node.frames_expired,
                "delivered": entry.frames_ok if entry else 0,
                "duplicates_seen": entry.duplicates if entry else 0,
                "dead": node.dead,
            }
        return out

    def _write_manifest(self, initial: bool):
        manifest = {
            "schema": MANIFEST_SCHEMA,
            "label": self.cfg.label,
            "seed": self.cfg.seed,
            "mode": self.cfg.mode,
            "plant_preset": self.cfg.plant_preset,
            "thresholds": self.gateway.thresholds.as_dict(),
            "config_echo": self.cfg.echo(),
            "radio_metadata": RADIO_METADATA,
            "epoch_wall_iso": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "accel": self.cfg.accel if self.cfg.mode == "live" else None,
        }
        if not initial:
            manifest["sim_summary"] = {
                "end_t": self.now,
                "final_phase": self.lifecycle.phase.value,
                "h_true_final": self.plant_state.hatch_fraction,
                "h_true_crossing_t": self.h_true_crossing_t,
                "feeding_advisory_t": self.lifecycle.advisory_t,
                "nodes": self._node_summary(),
                "link": self.medium.stats(),
                "gateway": {
                    "accepted": self.gateway.accepted,
                    "rejected": dict(sorted(self.gateway.reject_counters.items())),
                },
            }
        self.persister.write_manifest(manifest)

    def _finalize(self) -> RunResult:
        self._write_manifest(initial=False)
        self.persister.flush()
        return RunResult(
            exit_code=self._exit_code,
            final_phase=self.lifecycle.phase,
            sim_t=self.now,
            blockers=self._blockers,
        )

    # -- operator surface (thread-safe; used by the live API) -------------------

    def api_dispatch_command(self, addr: int, code, value: int):
        return self.call_on_loop(
            lambda now: self.gateway.dispatch_command(addr, code, value, now)
        )

    def api_ack_alert(self, alert_id: int, who: str):
        return self.call_on_loop(lambda now: self.gateway.ack_alert(alert_id, who, now))

    def api_put_thresholds(self, thresholds):
        def apply(now):
            self.gateway.set_thresholds(thresholds)
            return thresholds.as_dict()

        return self.call_on_loop(apply)

    def api_attest_aerator(self, on: bool):
        def apply(now):
            self.cfg.aerator_attested = bool(on)
            self.plant_state = set_actuator(self.plant_state, Actuator.AERATOR, bool(on))
            return bool(on)

        return self.call_on_loop(apply)

    def api_advance_phase(self, expect_from: RunPhase | None = None):
        def apply(now):
            ev = self.gate_evidence(now)
            return self.lifecycle.advance(ev, now, expect_from=expect_from)

        return self.call_on_loop(apply)

    def api_stop(self):
        def apply(now):
            self.operator_stop = True
            return True

        return self.call_on_loop(apply)
