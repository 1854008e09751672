"""The gated run lifecycle: culture prep through analysis.

Phases advance strictly in order and only when the gate out of the current
phase is satisfied by evidence (gateway state plus operator attestations).
The feeding advisory fires exactly once, when elapsed hatch time first
enters the configured window while monitoring is active.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

from .gateway import HATCH_DONE
from .model import HatchThresholds, PrepReport, SensorKind
from .persist import canonical_json


class RunPhase(Enum):
    CULTURE_PREP = "culture_prep"
    AERATION_ON = "aeration_on"
    NODE_SETUP = "node_setup"
    SENSOR_ATTACH = "sensor_attach"
    MONITORING = "monitoring"
    ANALYSIS = "analysis"


PHASE_ORDER = list(RunPhase)


class OrderViolationError(RuntimeError):
    pass


class GateBlockedError(RuntimeError):
    def __init__(self, reasons: list[str]):
        super().__init__("; ".join(reasons))
        self.reasons = reasons


@dataclass
class GateEvidence:
    """Everything the gates look at, assembled by the caller."""

    culture: PrepReport | None = None
    aerator_on: bool = False
    node_ready: bool = False  # >= 1 node with all five kinds and a heartbeat through
    fresh_kinds: set = field(default_factory=set)  # kinds accepted in the last 5 min
    h_est: float = 0.0
    now: float = 0.0
    max_duration_s: float = 129600.0
    operator_stop: bool = False

    def as_dict(self) -> dict:
        return {
            "culture": self.culture.as_dict() if self.culture else None,
            "aerator_on": self.aerator_on,
            "node_ready": self.node_ready,
            "fresh_kinds": sorted(k.key for k in self.fresh_kinds),
            "h_est": self.h_est,
            "now": self.now,
            "max_duration_s": self.max_duration_s,
            "operator_stop": self.operator_stop,
        }


class Lifecycle:
    def __init__(self, persister=None, publisher=None, start_t: float = 0.0):
        self.phase = RunPhase.CULTURE_PREP
        self.entered: list[tuple[RunPhase, float]] = [(RunPhase.CULTURE_PREP, start_t)]
        self.persister = persister
        self.publisher = publisher
        self.advisory_t: float | None = None
        self._record(RunPhase.CULTURE_PREP, start_t, evidence=None)

    # -- gates ---------------------------------------------------------------

    def next_phase(self) -> RunPhase | None:
        idx = PHASE_ORDER.index(self.phase)
        return PHASE_ORDER[idx + 1] if idx + 1 < len(PHASE_ORDER) else None

    def blockers(self, ev: GateEvidence) -> list[str]:
        """Reasons the gate out of the current phase is not satisfied."""
        target = self.next_phase()
        if target is None:
            return ["run already in analysis"]
        if target is RunPhase.AERATION_ON:
            if ev.culture is None:
                return ["culture validation not performed"]
            return [
                f"{v.parameter} {v.observed:g} {v.bound}" for v in ev.culture.violations
            ]
        if target is RunPhase.NODE_SETUP:
            return [] if ev.aerator_on else ["aerator not confirmed on"]
        if target is RunPhase.SENSOR_ATTACH:
            if ev.node_ready:
                return []
            return ["no registered node with all five sensors and an acked heartbeat"]
        if target is RunPhase.MONITORING:
            missing = [k.key for k in SensorKind if k not in ev.fresh_kinds]
            return [f"no fresh reading for {name}" for name in missing]
        # MONITORING -> ANALYSIS
        if ev.h_est >= HATCH_DONE or ev.now >= ev.max_duration_s or ev.operator_stop:
            return []
        return [
            f"hatch estimate {ev.h_est:.4f} below {HATCH_DONE}",
            "max duration not reached",
            "no operator stop",
        ]

    def advance(self, ev: GateEvidence, now: float, expect_from: RunPhase | None = None):
        """Move to the next phase; raises when out of order or gate-blocked."""
        if expect_from is not None and expect_from is not self.phase:
            raise OrderViolationError(
                f"advance requested from {expect_from.value} but run is in {self.phase.value}"
            )
        target = self.next_phase()
        if target is None:
            raise OrderViolationError("run already in analysis")
        reasons = self.blockers(ev)
        if reasons:
            raise GateBlockedError(reasons)
        self.phase = target
        self.entered.append((target, now))
        self._record(target, now, ev)
        return target

    def _record(self, phase: RunPhase, now: float, evidence: GateEvidence | None):
        digest = None
        if evidence is not None:
            digest = hashlib.sha256(canonical_json(evidence.as_dict()).encode()).hexdigest()[:16]
        record = {"type": "phase", "phase": phase.value, "t": now, "evidence_sha256": digest}
        if self.persister is not None:
            self.persister.phase(record)
        if self.publisher is not None:
            self.publisher({"type": "phase", "phase": phase.value, "t": now})

    # -- feeding advisory ----------------------------------------------------

    def feeding_check(
        self, now: float, hatch_start_t: float, thr: HatchThresholds
    ) -> bool:
        """Emit the one-shot yeast-feeding advisory when due; True if emitted now."""
        if self.advisory_t is not None or self.phase is not RunPhase.MONITORING:
            return False
        lo, hi = thr.feeding_window_s
        elapsed = now - hatch_start_t
        if lo <= elapsed <= hi:
            self.advisory_t = now
            record = {"type": "advisory", "advisory": "feeding_due", "t": now}
            if self.persister is not None:
                self.persister.phase(record)
            if self.publisher is not None:
                self.publisher(record)
            return True
        return False

    def phase_log(self) -> list[dict]:
        return [{"phase": p.value, "t": t} for p, t in self.entered]
