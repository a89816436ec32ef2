"""The orchestrator's operator surface: REST control endpoints and the
WebSocket bridge.

Bridge protocol (JSON text frames):
  events out:  {"type": "hr", "device": "A", "bpm": 72.0, "ts": ...}
               {"type": "beat_event", "device": "A", "bpm": 72.0, "ts": ...}
               {"type": "status", "state": ..., "modality": ..., "movie": ..., ...}
  commands in: {"type": "set_modality", "value": "WithNeighborHeart"}
               {"type": "set_movie", "value": "overwatch"}
               {"type": "start"} / {"type": "stop"}
  replies:     {"type": "ack", "cmd": ...} or {"type": "error", "message": ...}

Commands run through exactly the same SessionManager operations as the REST
endpoints and the CLI, so every path writes identical log records.
"""

from __future__ import annotations

import asyncio
import io
import json
import logging
import threading

import uvicorn
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from piheart import __version__
from piheart.estimator import StreamError, estimate_stream
from piheart.orchestrator import generate_condition_orders
from piheart.service.manager import SessionManager
from piheart.service.models import (
    CommandRequest,
    CommandResponse,
    EstimateItem,
    EstimateRequest,
    EstimateResponse,
    PlanModel,
    PlansResponse,
    StatusResponse,
    SynthesizeRequest,
    SynthesizeResponse,
)
from piheart.synth import BvpConfig, HrProfile, ReplayError, synthesize

log = logging.getLogger(__name__)


def create_app(manager: SessionManager) -> FastAPI:
    app = FastAPI(title="piheart orchestrator", version=__version__)
    app.state.manager = manager

    @app.get("/health")
    def health() -> dict:
        return {"ok": True, "version": __version__}

    @app.get("/session/status", response_model=StatusResponse)
    def session_status():
        return manager.status()

    @app.post("/session/start", response_model=StatusResponse)
    def session_start():
        try:
            return manager.start()
        except Exception as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc

    @app.post("/session/stop", response_model=StatusResponse)
    def session_stop():
        try:
            return manager.stop()
        except Exception as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc

    @app.post("/session/modality", response_model=CommandResponse)
    def session_modality(request: CommandRequest):
        try:
            manager.set_modality(request.value)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except Exception as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return CommandResponse()

    @app.post("/session/movie", response_model=CommandResponse)
    def session_movie(request: CommandRequest):
        try:
            manager.set_movie(request.value)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except Exception as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return CommandResponse()

    @app.post("/session/next-segment", response_model=CommandResponse)
    def session_next_segment():
        try:
            advanced = manager.next_segment()
        except Exception as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return CommandResponse(ok=advanced, detail=None if advanced else "end of plan")

    @app.get("/plans", response_model=PlansResponse)
    def plans(n: int = 1, seed: int = 0):
        if n < 1 or n > 1000:
            raise HTTPException(status_code=400, detail="n must be in 1..1000")
        generated = generate_condition_orders(n, seed=seed)
        return PlansResponse(plans=[PlanModel(**p.to_dict()) for p in generated])

    @app.post("/synthesize", response_model=SynthesizeResponse)
    def synthesize_endpoint(request: SynthesizeRequest):
        config = BvpConfig(
            sample_rate_hz=request.sample_rate_hz,
            hr_profile=HrProfile.constant(request.bpm),
            noise_sigma=request.noise_sigma,
            artifact_rate_per_min=request.artifact_rate_per_min,
            seed=request.seed,
        )
        samples = synthesize(config, request.duration_s)
        buf = io.StringIO()
        buf.write("t_ms,value\n")
        for s in samples:
            buf.write(f"{s.t},{s.value:.6g}\n")
        return SynthesizeResponse(csv=buf.getvalue(), n_samples=len(samples))

    @app.post("/estimate", response_model=EstimateResponse)
    def estimate_endpoint(request: EstimateRequest):
        rows = []
        for lineno, line in enumerate(request.csv.splitlines(), start=1):
            row = line.strip()
            if not row or (lineno == 1 and row == "t_ms,value"):
                continue
            try:
                t_str, v_str = row.split(",")
                rows.append((int(t_str), float(v_str)))
            except ValueError:
                raise HTTPException(status_code=400, detail=f"line {lineno}: bad row {row!r}")
        try:
            estimates = estimate_stream(rows, request.sample_rate_hz, request.mode)
        except (ReplayError, StreamError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return EstimateResponse(
            estimates=[
                EstimateItem(t_ms=e.window_end_t, bpm=e.bpm, bin=e.bin_index, mode=e.mode)
                for e in estimates
            ]
        )

    @app.websocket("/ws")
    async def bridge(ws: WebSocket) -> None:
        await ws.accept()
        loop = asyncio.get_running_loop()
        events: asyncio.Queue = asyncio.Queue()

        def push(event: dict) -> None:
            loop.call_soon_threadsafe(events.put_nowait, event)

        unsubscribe = manager.subscribe(push)

        async def sender() -> None:
            while True:
                await ws.send_json(await events.get())

        send_task = asyncio.create_task(sender())
        try:
            for event in manager.initial_events():
                await ws.send_json(event)
            while True:
                try:
                    message = await ws.receive_json()
                except json.JSONDecodeError:
                    await ws.send_json({"type": "error", "message": "frame is not valid JSON"})
                    continue
                reply = await asyncio.to_thread(_apply_command, manager, message)
                await ws.send_json(reply)
        except WebSocketDisconnect:
            pass
        finally:
            unsubscribe()
            send_task.cancel()

    return app


def _apply_command(manager: SessionManager, message) -> dict:
    if not isinstance(message, dict):
        return {"type": "error", "message": "command must be a JSON object"}
    cmd = message.get("type")
    try:
        if cmd == "set_modality":
            manager.set_modality(str(message.get("value")))
        elif cmd == "set_movie":
            manager.set_movie(str(message.get("value")))
        elif cmd == "start":
            manager.start()
        elif cmd == "stop":
            manager.stop()
        else:
            return {"type": "error", "message": f"unknown command {cmd!r}"}
    except Exception as exc:
        return {"type": "error", "cmd": cmd, "message": str(exc)}
    return {"type": "ack", "cmd": cmd}


class BridgeHandle:
    """uvicorn in a background thread; stop() shuts it down."""

    def __init__(self, server: uvicorn.Server, thread: threading.Thread):
        self._server = server
        self._thread = thread

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=5.0)


def bridge_serve(manager: SessionManager, host: str = "127.0.0.1", port: int = 8080) -> BridgeHandle:
    """Serve the operator bridge (REST + /ws) for an existing session setup."""
    config = uvicorn.Config(create_app(manager), host=host, port=port, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, name="piheart-bridge", daemon=True)
    thread.start()
    return BridgeHandle(server, thread)
