"""HTTP JSON API plus the server-sent event stream, rooted at /api/v1.

The API is a thin reader over the simulation: queries take a lock and
snapshot state; mutations are enqueued onto the simulation loop and
answered with its reply.  A replayed run serves the same read surface with
mutations disabled.  When a built operator console bundle is present it is
served at /.
"""

from __future__ import annotations

import contextlib
import json
import queue
import threading
from collections import deque
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .engine import Simulation
from .gateway import (
    AlreadyAckedError,
    InvalidArgumentError,
    NotFoundError,
)
from .lifecycle import GateBlockedError, OrderViolationError, RunPhase
from .model import HatchThresholds, SensorKind, classify
from .radio import CommandCode
from .replay import ReplayState

STREAM_RETENTION = 10000


class EventBus:
    """Fan-out for stream events with a bounded replayable backlog."""

    def __init__(self):
        self._lock = threading.Lock()
        self._next_id = 1
        self._backlog: deque = deque(maxlen=STREAM_RETENTION)
        self._subscribers: list[queue.Queue] = []

    def publish(self, event: dict):
        with self._lock:
            event = dict(event)
            event["event_id"] = self._next_id
            self._next_id += 1
            self._backlog.append(event)
            for q in self._subscribers:
                q.put(event)

    def subscribe(self, last_event_id: int | None):
        q: queue.Queue = queue.Queue()
        with self._lock:
            backlog = [
                e
                for e in self._backlog
                if last_event_id is not None and e["event_id"] > last_event_id
            ]
            self._subscribers.append(q)
        return q, backlog

    def unsubscribe(self, q: queue.Queue):
        with self._lock:
            with contextlib.suppress(ValueError):
                self._subscribers.remove(q)


class LiveView:
    readonly = False

    def __init__(self, sim: Simulation, bus: EventBus):
        self.sim = sim
        self.bus = bus

    @property
    def gateway(self):
        return self.sim.gateway

    @property
    def lock(self):
        return self.sim.lock

    def run_info(self) -> dict:
        from .engine import RADIO_METADATA

        with self.lock:
            return {
                "label": self.sim.cfg.label,
                "seed": self.sim.cfg.seed,
                "mode": self.sim.cfg.mode,
                "readonly": False,
                "phase": self.sim.lifecycle.phase.value,
                "sim_t": self.sim.now,
                "accel": self.sim.cfg.accel,
                "done": self.sim.done,
                "preset": self.sim.cfg.plant_preset,
                "manifest": {
                    "config_echo": self.sim.cfg.echo(),
                    "radio_metadata": RADIO_METADATA,
                },
            }

    def now(self) -> float:
        with self.lock:
            return self.sim.now

    def phase_log(self) -> list[dict]:
        with self.lock:
            return self.sim.lifecycle.phase_log()

    def ack_alert(self, alert_id: int, who: str):
        return self.sim.api_ack_alert(alert_id, who).result()

    def dispatch(self, addr: int, code: CommandCode, value: int) -> int:
        return self.sim.api_dispatch_command(addr, code, value).result()

    def put_thresholds(self, thresholds: HatchThresholds):
        return self.sim.api_put_thresholds(thresholds).result()

    def advance_phase(self, expect_from, aerator_on):
        if aerator_on is not None:
            self.sim.api_attest_aerator(aerator_on).result()
        return self.sim.api_advance_phase(expect_from).result()

    def stop(self):
        return self.sim.api_stop().result()


class ReplayView:
    readonly = True

    def __init__(self, state: ReplayState):
        self.state = state
        self.bus = EventBus()
        self.lock = threading.RLock()

    @property
    def gateway(self):
        return self.state.gateway

    def run_info(self) -> dict:
        manifest = self.state.manifest
        phases = [p for p in self.state.phases if p.get("type") == "phase"]
        return {
            "label": manifest.get("label", ""),
            "seed": manifest.get("seed"),
            "mode": "replay",
            "readonly": True,
            "phase": phases[-1]["phase"] if phases else None,
            "sim_t": self.state.end_t,
            "accel": None,
            "done": True,
            "preset": manifest.get("plant_preset"),
            "manifest": manifest,
        }

    def now(self) -> float:
        return self.state.end_t

    def phase_log(self) -> list[dict]:
        return [
            {"phase": p["phase"], "t": p["t"]}
            for p in self.state.phases
            if p.get("type") == "phase"
        ]


def _read_only_guard(view):
    if view.readonly:
        raise HTTPException(status_code=403, detail="replay is read-only")


class AckBody(BaseModel):
    who: str


class CommandBody(BaseModel):
    type: str
    value: int = 0


class AdvanceBody(BaseModel):
    expect_from: str | None = None
    aerator_on: bool | None = None


_COMMAND_CODES = {
    "set_interval": CommandCode.SET_INTERVAL,
    "sleep": CommandCode.SLEEP,
    "wake": CommandCode.WAKE,
}


def make_app(view, static_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="hatchsens gateway", version="1.0")
    api = "/api/v1"

    @app.get(api + "/run")
    def run_info():
        return view.run_info()

    @app.get(api + "/hatch")
    def hatch():
        with view.lock:
            return view.gateway.hatch(view.now()).as_dict()

    @app.get(api + "/readings")
    def readings(
        kind: str | None = None,
        node: int | None = None,
        t_from: float | None = Query(default=None, alias="from"),
        t_to: float | None = Query(default=None, alias="to"),
    ):
        kind_enum = SensorKind.from_key(kind) if kind else None
        with view.lock:
            rows = view.gateway.query_readings(kind_enum, node, t_from, t_to)
            thr = view.gateway.thresholds
            out = []
            for r in rows:
                band = thr.band_for(r.kind)
                out.append(
                    {
                        "t": r.t,
                        "node": r.node_addr,
                        "kind": r.kind.key,
                        "seq": r.seq,
                        "value": r.value,
                        "classification": classify(r.value, band).value if band else None,
                    }
                )
        return {"readings": out, "count": len(out)}

    @app.get(api + "/alerts")
    def alerts(open: bool | None = None):
        with view.lock:
            rows = view.gateway.list_alerts(open_only=open)
            return {"alerts": [a.as_dict() for a in rows]}

    @app.post(api + "/alerts/{alert_id}/ack")
    def ack_alert(alert_id: int, body: AckBody):
        _read_only_guard(view)
        try:
            alert = view.ack_alert(alert_id, body.who)
        except NotFoundError:
            raise HTTPException(status_code=404, detail=f"no alert {alert_id}")
        except AlreadyAckedError as err:
            raise HTTPException(status_code=409, detail=str(err))
        return alert.as_dict()

    @app.get(api + "/nodes")
    def nodes():
        with view.lock:
            return {"nodes": view.gateway.node_snapshot(view.now())}

    @app.post(api + "/nodes/{addr}/command")
    def command(addr: int, body: CommandBody):
        _read_only_guard(view)
        code = _COMMAND_CODES.get(body.type)
        if code is None:
            raise HTTPException(status_code=422, detail=f"unknown command type {body.type!r}")
        try:
            command_id = view.dispatch(addr, code, body.value)
        except NotFoundError:
            raise HTTPException(status_code=404, detail=f"node {addr} not registered")
        except InvalidArgumentError as err:
            raise HTTPException(status_code=422, detail=str(err))
        with view.lock:
            status = view.gateway.commands[command_id].status.value
        return {"command_id": command_id, "status": status}

    @app.get(api + "/commands/{command_id}")
    def command_info(command_id: int):
        with view.lock:
            cmd = view.gateway.commands.get(command_id)
            if cmd is None:
                raise HTTPException(status_code=404, detail=f"no command {command_id}")
            return cmd.as_dict()

    @app.get(api + "/thresholds")
    def thresholds():
        with view.lock:
            return view.gateway.thresholds.as_dict()

    @app.put(api + "/thresholds")
    def put_thresholds(document: dict):
        _read_only_guard(view)
        try:
            thr = HatchThresholds.from_dict(document)
        except (ValueError, KeyError, TypeError) as err:
            raise HTTPException(status_code=422, detail=f"invalid thresholds: {err}")
        return view.put_thresholds(thr)

    @app.get(api + "/phase")
    def phase():
        return {"phase": view.run_info()["phase"], "log": view.phase_log()}

    @app.post(api + "/phase/advance")
    def phase_advance(body: AdvanceBody):
        _read_only_guard(view)
        expect = RunPhase(body.expect_from) if body.expect_from else None
        try:
            new_phase = view.advance_phase(expect, body.aerator_on)
        except GateBlockedError as err:
            raise HTTPException(status_code=409, detail={"blockers": err.reasons})
        except OrderViolationError as err:
            raise HTTPException(status_code=409, detail=str(err))
        return {"phase": new_phase.value}

    @app.post(api + "/run/stop")
    def run_stop():
        _read_only_guard(view)
        view.stop()
        return {"stopping": True}

    @app.get(api + "/stream")
    def stream(request: Request):
        last_id = request.headers.get("last-event-id")
        try:
            last_id = int(last_id) if last_id else None
        except ValueError:
            last_id = None

        def gen():
            q, backlog = view.bus.subscribe(last_id)
            try:
                for event in backlog:
                    yield _sse(event)
                idle_polls = 0
                while True:
                    # short poll so a disconnect tears the generator down fast
                    try:
                        event = q.get(timeout=0.25)
                    except queue.Empty:
                        idle_polls += 1
                        if idle_polls >= 60:
                            idle_polls = 0
                            yield ": keepalive\n\n"
                        continue
                    idle_polls = 0
                    yield _sse(event)
            finally:
                view.bus.unsubscribe(q)

        return StreamingResponse(gen(), media_type="text/event-stream")

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")
    return app


def _sse(event: dict) -> str:
    return f"id: {event['event_id']}\ndata: {json.dumps(event)}\n\n"


def serve(app: FastAPI, address: str):
    import uvicorn

    host, _, port = address.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="warning")
