"""Rebuild gateway state from a persisted run directory.

Replay re-ingests readings.ndjson through the same ingest/alerting/
estimation code path the live gateway ran, interleaved with the same 1 Hz
silence scan, so the reproduced alert transitions and hatch-estimate
trajectory match the live run record for record.  Command attempt/ack
records are consulted for the sleep-window silence exclusion.  The input
directory is never written to.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .gateway import Gateway
from .model import HatchThresholds, SensorKind
from .persist import MemoryPersister, ReplayError, read_ndjson
from .radio import Frame, FrameType, encode_frame


@dataclass
class ReplayState:
    gateway: Gateway
    manifest: dict
    phases: list[dict]
    end_t: float
    persister: MemoryPersister


def _require(run_dir: Path, name: str) -> Path:
    path = run_dir / name
    if not path.exists():
        raise ReplayError(path, 0, "file missing")
    return path


def replay_run(run_dir: Path | str) -> ReplayState:
    run_dir = Path(run_dir)
    manifest_path = _require(run_dir, "manifest.json")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ReplayError(manifest_path, err.lineno, f"bad JSON: {err.msg}") from None
    readings = read_ndjson(_require(run_dir, "readings.ndjson"))
    phases = read_ndjson(_require(run_dir, "phases.ndjson"))
    commands = read_ndjson(_require(run_dir, "commands.ndjson"))

    thresholds = HatchThresholds.from_dict(manifest.get("thresholds", {}))
    persister = MemoryPersister()
    gw = Gateway(thresholds, persister=persister, publisher=None, send_downlink=None)
    for node_cfg in (manifest.get("config_echo") or {}).get("nodes", []):
        gw.register_node(
            node_cfg["addr"],
            node_cfg["sampling_interval_s"],
            tuple(SensorKind.from_key(k) for k in node_cfg["kinds"]),
        )

    phase_log = [p for p in phases if p.get("type") == "phase"]
    end_t = max([p["t"] for p in phase_log] + [r["t"] for r in readings] + [0.0])

    # merge command effects into the timeline for the silence exclusion
    cmd_events = sorted(
        (c for c in commands if c["event"] in ("attempt", "acked")),
        key=lambda c: c["t"],
    )
    cmd_idx = 0

    def apply_commands_up_to(t: float):
        nonlocal cmd_idx
        while cmd_idx < len(cmd_events) and cmd_events[cmd_idx]["t"] <= t:
            c = cmd_events[cmd_idx]
            cmd_idx += 1
            entry = gw.nodes.get(c["addr"])
            if entry is None:
                continue
            if c["event"] == "attempt" and c["type"] == "sleep":
                entry.commanded_sleep_until = c["t"] + c["value"] + entry.sampling_interval_s
            elif c["event"] == "acked" and c["type"] == "set_interval":
                entry.sampling_interval_s = c["value"]

    last_tick = -1

    def tick_up_to(t: float):
        nonlocal last_tick
        for tick in range(last_tick + 1, math.floor(t) + 1):
            apply_commands_up_to(tick)
            gw.detect_silence(float(tick))
        last_tick = max(last_tick, math.floor(t))

    for record in readings:
        t = record["t"]
        tick_up_to(t)
        frame = Frame(
            FrameType.DATA,
            src=record["node"],
            dst=0x0000,
            seq=record["seq"],
            kind_or_code=int(SensorKind.from_key(record["kind"])),
            timestamp=t,
            payload=record["centi"],
        )
        gw.ingest(encode_frame(frame), float(t))
    tick_up_to(end_t)

    return ReplayState(
        gateway=gw, manifest=manifest, phases=phases, end_t=end_t, persister=persister
    )
