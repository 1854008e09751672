"""Run-directory persistence: append-only NDJSON files plus the manifest.

Layout: manifest.json, readings.ndjson, alerts.ndjson, phases.ndjson,
commands.ndjson, frames.log (optional), report.json.  Records are written
with sorted keys and compact separators so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

from .radio import format_frame_log_line


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class ReplayError(ValueError):
    """A persisted file is unreadable; carries the offending line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = Path(path)
        self.line_no = line_no


def read_ndjson(path: Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if not line.endswith("\n"):
                raise ReplayError(path, line_no, "truncated final line")
            try:
                records.append(json.loads(stripped))
            except json.JSONDecodeError as err:
                raise ReplayError(path, line_no, f"bad JSON: {err.msg}") from None
    return records


class MemoryPersister:
    """Collects records in lists; used by tests and the replayer."""

    def __init__(self):
        self.readings: list[dict] = []
        self.alerts: list[dict] = []
        self.phases: list[dict] = []
        self.commands: list[dict] = []

    def reading(self, record: dict):
        self.readings.append(record)

    def alert(self, record: dict):
        self.alerts.append(record)

    def phase(self, record: dict):
        self.phases.append(record)

    def command(self, record: dict):
        self.commands.append(record)

    def frame(self, t: float, direction: str, data: bytes):
        pass

    def write_manifest(self, manifest: dict):
        pass

    def flush(self):
        pass

    def close(self):
        pass


class RunPersister:
    """Write-through NDJSON persistence for a live run."""

    def __init__(self, run_dir: Path, log_frames: bool = True):
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._files = {
            "reading": open(self.run_dir / "readings.ndjson", "w", encoding="utf-8"),
            "alert": open(self.run_dir / "alerts.ndjson", "w", encoding="utf-8"),
            "phase": open(self.run_dir / "phases.ndjson", "w", encoding="utf-8"),
            "command": open(self.run_dir / "commands.ndjson", "w", encoding="utf-8"),
        }
        self._frames = (
            open(self.run_dir / "frames.log", "w", encoding="utf-8") if log_frames else None
        )

    def _append(self, channel: str, record: dict):
        self._files[channel].write(canonical_json(record) + "\n")

    def reading(self, record: dict):
        self._append("reading", record)

    def alert(self, record: dict):
        self._append("alert", record)

    def phase(self, record: dict):
        self._append("phase", record)

    def command(self, record: dict):
        self._append("command", record)

    def frame(self, t: float, direction: str, data: bytes):
        if self._frames is not None:
            self._frames.write(format_frame_log_line(t, direction, data) + "\n")

    def write_manifest(self, manifest: dict):
        path = self.run_dir / "manifest.json"
        path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    def flush(self):
        for fh in self._files.values():
            fh.flush()
        if self._frames is not None:
            self._frames.flush()

    def close(self):
        for fh in self._files.values():
            fh.close()
        if self._frames is not None:
            self._frames.close()
