"""HTTP + WebSocket API for the interactive preview loop.

One solver per session; clients edit the problem document, steer the run
(start/pause/resume/reset, live alpha0 patches), poll scalar state, and
subscribe to the frame stream: a JSON header message followed by the
physical densities as row-major little-endian float32.
"""
from __future__ import annotations

import asyncio
import json
import os
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, HTMLResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, ConfigDict

from ..documents import DocumentError, parse_problem
from .sessions import IllegalTransition, Session, SessionRegistry

_PLACEHOLDER = """<!doctype html>
<html><head><title>bisimp preview service</title></head>
<body><h1>bisimp preview service</h1>
<p>No UI bundle found. Build the frontend (see README) or use the JSON API
under <code>/api</code>.</p></body></html>
"""


class SessionCreated(BaseModel):
    session_id: str


class SessionStateOut(BaseModel):
    status: str
    iter: int
    compliance: float
    residual_inf: float
    volume: float
    error: str | None = None


class ConfigPatch(BaseModel):
    """Config fields a client may change; outside idle only the live-tunable
    pair (alpha0, snapshot_every) is accepted."""

    model_config = ConfigDict(extra="forbid")

    algorithm: str | None = None
    alpha0: float | None = None
    beta: float | None = None
    krylov_dim: int | None = None
    eta: float | None = None
    max_iters: int | None = None
    tol_dv: float | None = None
    tol_res: float | None = None
    snapshot_every: int | None = None
    seed: int | None = None
    mean_projection: bool | None = None


def _ui_dir(explicit: str | None) -> Path | None:
    candidates = [explicit, os.environ.get("BISIMP_UI_DIR"), "frontend/dist"]
    for cand in candidates:
        if cand and Path(cand).is_dir():
            return Path(cand)
    return None


def create_app(static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="bisimp preview service")
    registry = SessionRegistry()

    def _session(session_id: str) -> Session:
        session = registry.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    @app.post("/api/session", response_model=SessionCreated)
    def create_session():
        return SessionCreated(session_id=registry.create().id)

    @app.put("/api/session/{session_id}/problem")
    async def put_problem(session_id: str, request: Request):
        session = _session(session_id)
        body = await request.body()
        try:
            problem = parse_problem(body.decode("utf-8"))
        except (DocumentError, UnicodeDecodeError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        try:
            session.set_problem(problem)
        except IllegalTransition as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return Response(status_code=200)

    @app.post("/api/session/{session_id}/{verb}")
    def control(session_id: str, verb: str):
        session = _session(session_id)
        actions = {
            "start": session.start,
            "pause": session.pause,
            "resume": session.resume,
            "reset": session.reset,
        }
        if verb not in actions:
            raise HTTPException(status_code=404, detail=f"unknown verb {verb!r}")
        try:
            actions[verb]()
        except IllegalTransition as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return Response(status_code=200)

    @app.patch("/api/session/{session_id}/config")
    def patch_config(session_id: str, patch: ConfigPatch):
        session = _session(session_id)
        changes = {k: v for k, v in patch.model_dump().items() if v is not None}
        try:
            session.patch_config(changes)
        except IllegalTransition as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except (TypeError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return Response(status_code=200)

    @app.get("/api/session/{session_id}/state", response_model=SessionStateOut)
    def get_state(session_id: str):
        return SessionStateOut(**_session(session_id).state_view())

    @app.websocket("/api/session/{session_id}/stream")
    async def stream(websocket: WebSocket, session_id: str):
        session = registry.get(session_id)
        if session is None:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        seen = 0
        try:
            while True:
                latest = session.slot.latest(after=seen)
                if latest is None:
                    await asyncio.sleep(0.02)
                    continue
                seen, frame = latest
                header = {
                    "iter": frame.iter,
                    "compliance": frame.compliance,
                    "residual_inf": frame.residual_inf,
                    "volume": frame.volume,
                    "nx": frame.nx,
                    "ny": frame.ny,
                    "encoding": "f32le",
                }
                await websocket.send_text(json.dumps(header))
                await websocket.send_bytes(frame.payload)
        except (WebSocketDisconnect, RuntimeError):
            return

    ui = _ui_dir(static_dir)
    if ui is not None:
        app.mount("/assets", StaticFiles(directory=ui), name="assets")

        @app.get("/", response_class=FileResponse)
        def index():
            return FileResponse(ui / "index.html")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index_placeholder():
            return HTMLResponse(_PLACEHOLDER)

    return app
