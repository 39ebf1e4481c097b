"""WebSocket streaming service around a retargeting session.

One WebSocket connection = one session (own robot state, clutches, lock).
Frames are JSON objects tagged by "kind"; the server numbers its outbound
frames with a per-connection "seq".

    server -> client: hello, state_update, diagnostics, error
    client -> server: tracker_sample, command

Commands: clutch_engage, clutch_release (optional "target": device or
channel), lock_engage, lock_release, grasp_cycle ("target": left|right),
reset, diagnostics, and tick.

Tick modes: with rate > 0 the server advances the session itself at `rate`
ticks per second and pushes a state_update per tick. With rate == 0
(lockstep) the session advances only on an explicit {"kind": "command",
"name": "tick"}, which makes a streamed trajectory reproduce an offline
replay tick for tick.

GET /model returns the kinematic model document. A directory of static UI
files may be mounted at the web root.
"""

from __future__ import annotations

import asyncio
import collections
import json

import numpy as np
from fastapi import FastAPI
from starlette.responses import JSONResponse
from starlette.staticfiles import StaticFiles
from starlette.websockets import WebSocket, WebSocketDisconnect

from . import collision
from .errors import InputError
from .kinematics import KinematicModel
from .retarget import RetargetConfig, SessionDriver, TrackerSample
from .solver import SolverConfig

PROTO_VERSION = 1
OUTBOX_LIMIT = 256


class _Outbox:
    """Bounded outbound frame buffer: when full, the oldest non-error frame
    is dropped so stale state never delays fresh state or error reports."""

    def __init__(self, limit: int = OUTBOX_LIMIT):
        self.frames: collections.deque = collections.deque()
        self.limit = limit
        self.ready = asyncio.Event()

    def push(self, frame: dict):
        if len(self.frames) >= self.limit:
            for i, old in enumerate(self.frames):
                if old.get("kind") != "error":
                    del self.frames[i]
                    break
            else:
                self.frames.popleft()
        self.frames.append(frame)
        self.ready.set()

    async def drain(self, websocket: WebSocket):
        while True:
            await self.ready.wait()
            while self.frames:
                await websocket.send_text(json.dumps(self.frames.popleft()))
            self.ready.clear()


class _Connection:
    def __init__(self, websocket: WebSocket, app_state):
        self.ws = websocket
        self.state = app_state
        cfg = SolverConfig(**vars(app_state.solver_config))
        cfg.pair_barriers = dict(cfg.pair_barriers)
        self.driver = SessionDriver(app_state.model, cfg, app_state.retarget_config)
        self.seq = 0
        self.outbox = _Outbox()
        self.overruns = 0
        self.tick_period = None  # measured, seconds

    def frame(self, kind: str, payload: dict) -> dict:
        self.seq += 1
        return {"kind": kind, "seq": self.seq, **payload}

    def hello(self) -> dict:
        return self.frame(
            "hello",
            {
                "proto_version": PROTO_VERSION,
                "model": self.state.model.name,
                "n_joints": self.state.model.n_joints,
                "rate": self.state.rate,
                "dt": self.driver.solver_config.dt,
                "lockstep": self.state.rate == 0,
            },
        )

    def state_update(self, record) -> dict:
        fk = self.driver.state.fk(self.state.model)
        p0, p1, radius = collision.body_world_segments(self.state.model, fk)
        bodies = [
            {
                "name": b.name,
                "kind": b.kind,
                "radius": float(radius[i]),
                "p0": [float(v) for v in p0[i]],
                "p1": [float(v) for v in p1[i]],
            }
            for i, b in enumerate(self.state.model.collision_bodies)
        ]
        frames = {name: pose.to_dict() for name, pose in fk.frames.items()}
        payload = record.to_dict()
        payload["pair_h"] = [float(v) for v in record.report.pair_h]
        payload["frames"] = frames
        payload["bodies"] = bodies
        return self.frame("state_update", payload)

    def diagnostics(self) -> dict:
        d = self.driver
        return self.frame(
            "diagnostics",
            {
                "tick": d.tick_index,
                "q": [float(v) for v in d.state.q],
                "channels": dict(d.session.channel_state),
                "locked": d.session.lock is not None,
                "grasp": dict(d.session.grasp),
                "solver": vars(d.solver_config),
                "retarget": d.retarget_config.to_dict(),
                "pairs": [
                    [p.body_a.name, p.body_b.name] for p in self.state.model.collision_pairs
                ],
                "overruns": self.overruns,
                "tick_period": self.tick_period,
            },
        )

    def error(self, message: str, in_reply_to=None) -> dict:
        payload = {"message": message}
        if in_reply_to is not None:
            payload["in_reply_to"] = in_reply_to
        return self.frame("error", payload)

    def handle(self, frame: dict) -> list[dict]:
        """Apply one inbound frame; returns frames to send back."""
        kind = frame.get("kind")
        reply_to = frame.get("seq")
        try:
            if kind == "tracker_sample":
                body = {k: v for k, v in frame.items() if k not in ("kind", "seq")}
                self.driver.ingest(TrackerSample.from_dict(body))
                return []
            if kind == "command":
                name = frame.get("name")
                if name == "tick":
                    if self.state.rate != 0:
                        return [self.error("tick command requires lockstep mode", reply_to)]
                    return [self.state_update(self.driver.tick())]
                if name == "diagnostics":
                    return [self.diagnostics()]
                self.driver.command(name, frame.get("target"))
                return []
            return [self.error(f"unknown frame kind {kind!r}", reply_to)]
        except InputError as exc:
            return [self.error(str(exc), reply_to)]


def create_app(
    model: KinematicModel,
    model_doc: dict | None = None,
    solver_config: SolverConfig | None = None,
    retarget_config: RetargetConfig | None = None,
    rate: float = 60.0,
    ui_dir: str | None = None,
) -> FastAPI:
    """Build the service. rate == 0 selects lockstep mode; otherwise the
    solver dt is set to 1/rate and sessions tick in real time."""
    if rate < 0:
        raise InputError("rate must be >= 0")
    app = FastAPI()
    app.state.model = model
    app.state.model_doc = model_doc or {}
    app.state.solver_config = solver_config or SolverConfig()
    if rate > 0:
        app.state.solver_config.dt = 1.0 / rate
    app.state.retarget_config = retarget_config or RetargetConfig()
    app.state.rate = rate

    @app.get("/model")
    async def get_model():
        return JSONResponse(app.state.model_doc)

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        conn = _Connection(websocket, app.state)
        await websocket.send_text(json.dumps(conn.hello()))
        tasks = []
        if app.state.rate > 0:
            tasks.append(asyncio.ensure_future(_tick_loop(conn)))
            tasks.append(asyncio.ensure_future(conn.outbox.drain(websocket)))
        try:
            while True:
                raw = await websocket.receive_text()
                try:
                    frame = json.loads(raw)
                    if not isinstance(frame, dict):
                        raise ValueError("frame must be a JSON object")
                except ValueError as exc:
                    replies = [conn.error(f"malformed frame: {exc}")]
                else:
                    replies = conn.handle(frame)
                for reply in replies:
                    if app.state.rate > 0:
                        conn.outbox.push(reply)
                    else:
                        await websocket.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            for t in tasks:
                t.cancel()

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:

        @app.get("/")
        async def index():
            return JSONResponse(
                {
                    "service": "teleoperation retargeting",
                    "model": model.name,
                    "websocket": "/ws",
                    "model_endpoint": "/model",
                    "rate": rate,
                }
            )

    return app


async def _tick_loop(conn: _Connection):
    dt = conn.driver.solver_config.dt
    loop = asyncio.get_event_loop()
    last = None
    next_due = loop.time() + dt
    while True:
        delay = next_due - loop.time()
        if delay > 0:
            await asyncio.sleep(delay)
        else:
            # this tick started late: the previous one ran past its slot
            conn.overruns += 1
        next_due += dt
        now = loop.time()
        if last is not None:
            conn.tick_period = now - last
        last = now
        record = conn.driver.tick()
        conn.outbox.push(conn.state_update(record))


def serve(
    model: KinematicModel,
    model_doc: dict,
    solver_config: SolverConfig,
    retarget_config: RetargetConfig,
    host: str = "127.0.0.1",
    port: int = 8733,
    rate: float = 60.0,
    ui_dir: str | None = None,
):
    import uvicorn

    app = create_app(model, model_doc, solver_config, retarget_config, rate, ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
