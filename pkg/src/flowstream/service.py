"""Streaming service: concurrent live steering sessions over WebSocket.

Each session speaks newline-delimited JSON messages (one object per
WebSocket text message; replay logs join them with newlines):

    in:  {"type": "configure", "seed"?, "steps_per_unit"?, "cfg_scale"?,
          "control_id"?, "throttle_ms"?}
         {"type": "start", ...same optional fields}
         {"type": "set_control", "control_id": int}
         {"type": "stop"}
    out: {"type": "frame", "frame_index", "step_index", "values", "alpha_snapshot",
          "control"}
         {"type": "window_state", "t", "m", "n", "pending": [{frame, control}]}
         {"type": "error", "message"}
         {"type": "ended", "frames"}

A session's stream is unbounded: frames activate lazily, a set_control
takes effect at the next frame activation (already-activated frames keep
the control they were bound to), and the stepping loop awaits each send,
so a stalled consumer pauses generation instead of dropping frames.
Sessions are independent; frame messages are strictly index-ordered and
deterministic given (seed, control timeline).
"""

from __future__ import annotations

import asyncio
import json
from dataclasses import dataclass

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .denoiser import DenoiserParams
from .sampler import SampleConfig, StreamSession
from .schedule import make_triangular


@dataclass
class ServiceConfig:
    n_s: float = 4.0
    default_control: int = 0
    steps_per_unit: int = 32
    cfg_scale: float = 1.0
    throttle_ms: float = 0.0
    window_state_every: int = 8  # solver steps between window_state messages


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


class _Session:
    def __init__(self, params: DenoiserParams, svc: ServiceConfig):
        self.params = params
        self.svc = svc
        self.seed = 0
        self.steps_per_unit = svc.steps_per_unit
        self.cfg_scale = svc.cfg_scale
        self.throttle_ms = svc.throttle_ms
        self.latest_control = svc.default_control
        self.started = False
        self.stream: StreamSession | None = None

    def configure(self, msg):
        if self.started:
            raise ValueError("configure is only valid before start")
        self._apply(msg)

    def _apply(self, msg):
        if "seed" in msg:
            self.seed = int(msg["seed"])
        if "steps_per_unit" in msg:
            v = int(msg["steps_per_unit"])
            if v < 1:
                raise ValueError("steps_per_unit must be >= 1")
            self.steps_per_unit = v
        if "cfg_scale" in msg:
            self.cfg_scale = float(msg["cfg_scale"])
        if "throttle_ms" in msg:
            self.throttle_ms = max(0.0, float(msg["throttle_ms"]))
        if "control_id" in msg:
            self.set_control(int(msg["control_id"]), allow_before_start=True)

    def set_control(self, control_id: int, allow_before_start: bool = False):
        if not self.started and not allow_before_start:
            raise ValueError("set_control is only valid after start")
        if not 0 <= control_id < self.params.cfg.num_controls - 1:
            raise ValueError(
                f"control_id {control_id} out of range [0, {self.params.cfg.num_controls - 1})"
            )
        self.latest_control = control_id

    def start(self, msg):
        if self.started:
            raise ValueError("session already started")
        self._apply(msg)
        sched = make_triangular(self.svc.n_s, K=1)  # K unused for unbounded streams
        cfg = SampleConfig(
            steps_per_unit=self.steps_per_unit,
            cfg_scale=self.cfg_scale,
            seed=self.seed,
            unbounded=True,
        )
        self.stream = StreamSession(self.params, lambda k: self.latest_control, sched, cfg)
        self.started = True


def create_app(params: DenoiserParams, svc: ServiceConfig | None = None) -> FastAPI:
    svc = svc or ServiceConfig()
    app = FastAPI(title="flowstream streaming service")

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "n_s": svc.n_s, "D": params.cfg.D,
                "num_controls": params.cfg.num_controls}

    @app.websocket("/session")
    async def session_socket(ws: WebSocket):
        await ws.accept()
        session = _Session(params, svc)
        stop = asyncio.Event()

        async def reader():
            while not stop.is_set():
                try:
                    raw = await ws.receive_text()
                except WebSocketDisconnect:
                    stop.set()
                    return
                for line in raw.splitlines() or [""]:
                    if not line.strip():
                        continue
                    try:
                        msg = json.loads(line)
                        kind = msg.get("type")
                        if kind == "configure":
                            session.configure(msg)
                        elif kind == "start":
                            session.start(msg)
                        elif kind == "set_control":
                            session.set_control(int(msg.get("control_id", -1)))
                        elif kind == "stop":
                            stop.set()
                        else:
                            raise ValueError(f"unknown message type {kind!r}")
                    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as e:
                        try:
                            await ws.send_text(_dumps({"type": "error", "message": str(e)}))
                        except Exception:
                            stop.set()
                            return

        reader_task = asyncio.create_task(reader())
        emitted = 0
        try:
            while not stop.is_set():
                if not session.started:
                    await asyncio.sleep(0.005)
                    continue
                stream = session.stream
                records = stream.step()
                for rec in records:
                    await ws.send_text(_dumps({
                        "type": "frame",
                        "frame_index": rec.frame_index,
                        "step_index": rec.step_index,
                        "values": rec.values.tolist(),
                        "alpha_snapshot": rec.alpha_snapshot,
                        "control": stream.state.controls.get(
                            rec.frame_index, session.latest_control),
                    }))
                    emitted += 1
                if stream.state.step_index % svc.window_state_every == 0:
                    ws_state = stream.window_state()
                    await ws.send_text(_dumps({
                        "type": "window_state",
                        "t": ws_state["t"],
                        "m": ws_state["m"],
                        "n": ws_state["n"],
                        "pending": ws_state["pending"],
                    }))
                if session.throttle_ms > 0:
                    await asyncio.sleep(session.throttle_ms / 1000.0)
                else:
                    await asyncio.sleep(0)  # yield to the reader
        except WebSocketDisconnect:
            pass
        finally:
            stop.set()
            reader_task.cancel()
            try:
                await ws.send_text(_dumps({"type": "ended", "frames": emitted}))
                await ws.close()
            except Exception:
                pass

    return app
