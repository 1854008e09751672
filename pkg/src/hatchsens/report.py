"""End-of-run analysis: builds report.json (and a markdown rendering) solely
from the files persisted in a run directory, so a report can be regenerated
offline and a replayed run produces the identical document.
"""

from __future__ import annotations

import json
from pathlib import Path

from .gateway import HATCH_DONE, HatchEstimator
from .model import Classification, HatchThresholds, SensorKind, classify
from .persist import read_ndjson

REPORT_SCHEMA = "hatchsens-report-v1"


class ReportError(ValueError):
    """A required run-directory file is missing or unreadable."""


def _require(run_dir: Path, name: str) -> Path:
    path = run_dir / name
    if not path.exists():
        raise ReportError(f"missing {name} in {run_dir}")
    return path


def finalize_report(run_dir: Path | str) -> dict:
    run_dir = Path(run_dir)
    manifest = json.loads(_require(run_dir, "manifest.json").read_text(encoding="utf-8"))
    readings = read_ndjson(_require(run_dir, "readings.ndjson"))
    alerts = read_ndjson(_require(run_dir, "alerts.ndjson"))
    phases = read_ndjson(_require(run_dir, "phases.ndjson"))
    commands = read_ndjson(_require(run_dir, "commands.ndjson"))

    thresholds = HatchThresholds.from_dict(manifest.get("thresholds", {}))
    phase_log = [p for p in phases if p.get("type") == "phase"]
    advisory = next((p for p in phases if p.get("type") == "advisory"), None)
    end_t = max(
        [p["t"] for p in phase_log] + [r["t"] for r in readings] + [0.0]
    )

    estimator = HatchEstimator(thresholds)
    for r in readings:
        estimator.on_reading(SensorKind.from_key(r["kind"]), r["value"], r["t"])

    report = {
        "schema": REPORT_SCHEMA,
        "run": {
            "label": manifest.get("label", ""),
            "seed": manifest.get("seed"),
            "preset": manifest.get("plant_preset"),
            "final_phase": phase_log[-1]["phase"] if phase_log else None,
            "end_t": end_t,
            "phases": [{"phase": p["phase"], "t": p["t"]} for p in phase_log],
        },
        "hatch": {
            "final_h_est": estimator.h_est,
            "first_crossing_t": estimator.first_crossing_t,
            "target": HATCH_DONE,
        },
        "parameters": _parameter_stats(readings, thresholds, end_t),
        "alerts": _alert_stats(alerts),
        "commands": _command_stats(commands),
        "feeding_advisory_t": advisory["t"] if advisory else None,
        "sim_truth": manifest.get("sim_summary"),
        "config": manifest.get("config_echo"),
    }
    return report


def _parameter_stats(readings: list[dict], thr: HatchThresholds, end_t: float) -> dict:
    by_kind: dict[str, list[dict]] = {}
    for r in readings:
        by_kind.setdefault(r["kind"], []).append(r)
    out = {}
    for kind in SensorKind:
        rows = sorted(by_kind.get(kind.key, []), key=lambda r: (r["t"], r["seq"]))
        band = thr.band_for(kind)
        if not rows or band is None:
            out[kind.key] = {
                "n_readings": len(rows),
                "time_in_range_frac": None,
                "first_t": rows[0]["t"] if rows else None,
                "last_t": rows[-1]["t"] if rows else None,
            }
            continue
        first_t, last_value_t = rows[0]["t"], rows[0]["t"]
        in_range_s = 0.0
        current_in = classify(rows[0]["value"], band) is Classification.IN_RANGE
        for row in rows[1:]:
            if row["t"] > last_value_t:
                if current_in:
                    in_range_s += row["t"] - last_value_t
                last_value_t = row["t"]
            current_in = classify(row["value"], band) is Classification.IN_RANGE
        if end_t > last_value_t and current_in:
            in_range_s += end_t - last_value_t
        span = end_t - first_t
        out[kind.key] = {
            "n_readings": len(rows),
            "time_in_range_frac": (in_range_s / span) if span > 0 else 1.0,
            "first_t": first_t,
            "last_t": rows[-1]["t"],
        }
    return out


def _alert_stats(alert_records: list[dict]) -> dict:
    raised = [a for a in alert_records if a["event"] == "raise"]
    acks = {a["id"]: a for a in alert_records if a["event"] == "ack"}
    cleared = {a["id"] for a in alert_records if a["event"] == "clear"}
    by_severity: dict[str, int] = {}
    by_kind: dict[str, int] = {}
    for a in raised:
        by_severity[a["severity"]] = by_severity.get(a["severity"], 0) + 1
        key = a["kind"] if a["kind"] else "node"
        by_kind[key] = by_kind.get(key, 0) + 1
    ack_delays = [acks[a["id"]]["t"] - a["t"] for a in raised if a["id"] in acks]
    return {
        "total": len(raised),
        "by_severity": by_severity,
        "by_kind": by_kind,
        "acked": len(ack_delays),
        "mean_time_to_ack_s": (sum(ack_delays) / len(ack_delays)) if ack_delays else None,
        "open_at_end": len([a for a in raised if a["id"] not in cleared]),
    }


def _command_stats(command_records: list[dict]) -> dict:
    dispatched = [c for c in command_records if c["event"] == "dispatched"]
    acked = [c for c in command_records if c["event"] == "acked"]
    timed_out = [c for c in command_records if c["event"] == "timed_out"]
    return {"dispatched": len(dispatched), "acked": len(acked), "timed_out": len(timed_out)}


def write_report(run_dir: Path | str) -> dict:
    report = finalize_report(run_dir)
    path = Path(run_dir) / "report.json"
    path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return report


_SECTION_TITLES = [
    ("water", "Water"),
    ("o2_mg_l", "Oxygen"),
    ("ph", "pH"),
    ("light_lux", "Illumination"),
    ("temperature_c", "Temperature"),
    ("humidity_pct", "Humidity"),
    ("aeration", "Aeration"),
    ("salinity", "Salinity"),
    ("density", "Density of cysts"),
    ("incubation", "Incubation time"),
]


def render_markdown(report: dict) -> str:
    """Human-readable summary with one section per hatching parameter."""
    cfg = report.get("config") or {}
    culture = cfg.get("culture", {})
    lines = [
        f"# Hatch run report: {report['run'].get('label', '')}".rstrip(),
        "",
        f"- final phase: {report['run']['final_phase']}",
        f"- sim end: {report['run']['end_t']} s",
        f"- seed: {report['run'].get('seed')}",
        "",
    ]
    params = report["parameters"]
    for key, title in _SECTION_TITLES:
        lines.append(f"## {title}")
        if key in params:
            stats = params[key]
            if stats["time_in_range_frac"] is None:
                lines.append("no readings recorded")
            else:
                lines.append(f"- readings: {stats['n_readings']}")
                lines.append(f"- time in range: {stats['time_in_range_frac']:.4f}")
        elif key == "water":
            lines.append(f"- quality: {culture.get('water_quality', 'n/a')}")
        elif key == "aeration":
            lines.append(f"- attested on: {cfg.get('aerator_on', 'n/a')}")
        elif key == "salinity":
            lines.append(f"- prep salinity: {culture.get('salinity_ppt', 'n/a')} ppt")
        elif key == "density":
            lines.append(f"- cyst density: {culture.get('density_g_per_l', 'n/a')} g/L")
        elif key == "incubation":
            hatch = report["hatch"]
            lines.append(f"- final hatch estimate: {hatch['final_h_est']:.4f}")
            lines.append(f"- first crossing of {hatch['target']}: {hatch['first_crossing_t']} s")
        lines.append("")
    alerts = report["alerts"]
    lines.append("## Alerts")
    lines.append(f"- raised: {alerts['total']} (open at end: {alerts['open_at_end']})")
    if alerts["mean_time_to_ack_s"] is not None:
        lines.append(f"- mean time to ack: {alerts['mean_time_to_ack_s']:.1f} s")
    if report.get("feeding_advisory_t") is not None:
        lines.append("")
        lines.append(f"Feeding advisory emitted at t={report['feeding_advisory_t']} s.")
    return "\n".join(lines) + "\n"
