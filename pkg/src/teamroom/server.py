"""HTTP and WebSocket transport over the gateway.

Thin by design: every session rule lives in Gateway, and the socket handler
is a dumb bridge. Frames flow to the client through the connection's queue
only (one writer per socket), so rejection frames can never overtake or
interleave with event broadcasts.

Routes:
  POST   /sessions                  create (body: session config JSON)
  GET    /sessions                  list ids
  GET    /sessions/{id}             small status blob
  GET    /sessions/{id}/transcript  the raw JSONL log
  DELETE /sessions/{id}             close + metrics JSON
  GET    /health
  WS     /sessions/{id}/ws          commands in, frames out
"""

from __future__ import annotations

import asyncio
import json
import logging
import uuid

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse
from starlette.concurrency import run_in_threadpool

from .config import ConfigError, Mode, SessionConfig, TriggerParams
from .gateway import DuplicateSessionId, Gateway, GatewayError, UnknownSession

log = logging.getLogger(__name__)


def build_app(gateway: Gateway, default_mode: Mode = Mode.ORCHESTRATED,
              default_trigger_params: TriggerParams | None = None,
              default_task_prompt: str = "") -> FastAPI:
    app = FastAPI(title="teamroom", docs_url=None, redoc_url=None)
    app.state.gateway = gateway

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "sessions": len(gateway.session_ids())}

    @app.get("/sessions")
    def list_sessions() -> dict:
        return {"sessions": gateway.session_ids()}

    @app.post("/sessions")
    async def create_session(request: Request) -> JSONResponse:
        try:
            raw = await request.json()
        except json.JSONDecodeError:
            return JSONResponse({"error": "body must be JSON"}, status_code=400)
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            return JSONResponse({"error": "body must be a JSON object"}, status_code=400)
        raw.setdefault("session_id", uuid.uuid4().hex[:12])
        raw.setdefault("mode", default_mode.value)
        raw.setdefault("task_prompt", default_task_prompt)
        try:
            config = SessionConfig.from_dict(raw)
            if default_trigger_params is not None and "trigger_params" not in raw:
                config = SessionConfig(
                    config.session_id, config.group_size_limit,
                    config.duration_limit_s, config.mode,
                    default_trigger_params, config.task_prompt)
            session_id = gateway.create_session(config)
        except ConfigError as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        except DuplicateSessionId as exc:
            return JSONResponse({"error": f"session {exc} already exists"}, status_code=409)
        except GatewayError as exc:
            return JSONResponse({"error": str(exc)}, status_code=422)
        return JSONResponse({"session_id": session_id, "mode": config.mode.value},
                            status_code=201)

    @app.get("/sessions/{session_id}")
    def describe(session_id: str) -> JSONResponse:
        try:
            return JSONResponse(gateway.describe(session_id))
        except UnknownSession:
            return JSONResponse({"error": "unknown session"}, status_code=404)

    @app.get("/sessions/{session_id}/transcript")
    def transcript(session_id: str):
        try:
            path = gateway.transcript_path(session_id)
        except UnknownSession:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        return FileResponse(path, media_type="application/x-ndjson",
                            filename=path.name)

    @app.delete("/sessions/{session_id}")
    def close_session(session_id: str) -> JSONResponse:
        try:
            return JSONResponse(gateway.close_session(session_id))
        except UnknownSession:
            return JSONResponse({"error": "unknown session"}, status_code=404)

    @app.websocket("/sessions/{session_id}/ws")
    async def session_ws(websocket: WebSocket, session_id: str) -> None:
        await websocket.accept()
        participant_id = websocket.query_params.get("participant_id")
        try:
            conn = gateway.connect(session_id, participant_id)
        except (UnknownSession, GatewayError) as exc:
            await websocket.send_json({
                "frame": "rejection", "command": "connect",
                "code": "connect_failed", "message": str(exc),
            })
            await websocket.close(code=4404)
            return

        async def pump() -> None:
            while True:
                frame = await run_in_threadpool(conn.next_frame, 0.2)
                if frame is not None:
                    await websocket.send_json(frame)
                elif not conn.alive:
                    break

        sender = asyncio.create_task(pump())
        try:
            while True:
                try:
                    message = await websocket.receive_json()
                except json.JSONDecodeError:
                    conn.deliver({"frame": "rejection", "command": None,
                                  "code": "bad_command",
                                  "message": "frames must be JSON objects"})
                    continue
                if not isinstance(message, dict) or not isinstance(message.get("cmd"), str):
                    conn.deliver({"frame": "rejection", "command": None,
                                  "code": "bad_command",
                                  "message": 'expected {"cmd": ..., "data": {...}}'})
                    continue
                data = message.get("data")
                if data is not None and not isinstance(data, dict):
                    conn.deliver({"frame": "rejection", "command": message["cmd"],
                                  "code": "bad_command",
                                  "message": "data must be an object"})
                    continue
                await run_in_threadpool(
                    gateway.handle_command, session_id, conn, message["cmd"], data)
        except WebSocketDisconnect:
            pass
        finally:
            gateway.disconnect(conn)
            sender.cancel()

    return app
