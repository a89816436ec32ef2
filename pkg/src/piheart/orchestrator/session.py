"""Live session: the laptop-controller analog.

Connects to both devices' brokers, subscribes their telemetry, applies the
active modality's heart-rate routing, and records every message with
orchestrator wall-clock timestamps. One routing thread owns the routing rule
and the timestamp assigner; broker callbacks and operator commands all go
through its queue, so a modality switch is atomic at a message boundary.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

from piheart.mqtt import ConnectError, MqttClient
from piheart.mqtt.topics import device_topic
from piheart.orchestrator.plans import Modality, SessionPlan, routing_for
from piheart.orchestrator.recorder import RecorderError, SessionRecorder

log = logging.getLogger(__name__)

EventListener = Callable[[dict], None]


class SessionState(str, Enum):
    IDLE = "IDLE"
    ACTIVE = "ACTIVE"
    DEGRADED = "DEGRADED"  # recording lost; routing still live
    STOPPED = "STOPPED"


class SessionStartError(RuntimeError):
    """Session could not start (broker down, log exists); no partial session."""


class SessionStateError(RuntimeError):
    """Operation not valid in the current session state."""


@dataclass(frozen=True)
class DeviceRef:
    device_id: str
    host: str
    port: int


class Session:
    """One pair's recording session over two already-running device brokers."""

    def __init__(self, plan: SessionPlan, dev_a: DeviceRef, dev_b: DeviceRef, log_path: str | Path):
        self.plan = plan
        self.devices = (dev_a, dev_b)
        self.log_path = Path(log_path)
        self.state = SessionState.IDLE
        self.modality: Modality | None = None
        self.movie: str | None = None
        self.segment_index = -1
        self.last_hr: dict[str, tuple[int, float]] = {}
        self._clients: dict[str, MqttClient] = {}
        self._recorder: SessionRecorder | None = None
        self._rule: dict[str, str] = {}
        self._queue: queue.Queue[tuple] = queue.Queue()
        self._router: threading.Thread | None = None
        self._listeners: list[EventListener] = []
        self._last_ts = 0

    # -- events ----------------------------------------------------------

    def add_listener(self, listener: EventListener) -> Callable[[], None]:
        self._listeners.append(listener)

        def remove() -> None:
            if listener in self._listeners:
                self._listeners.remove(listener)

        return remove

    def _emit(self, event: dict) -> None:
        for listener in list(self._listeners):
            try:
                listener(event)
            except Exception:
                log.exception("event listener failed")

    def _emit_status(self, **extra) -> None:
        self._emit({"type": "status", "ts": self._last_ts, **self.status(), **extra})

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "Session":
        if self.state is not SessionState.IDLE:
            raise SessionStateError(f"cannot start from {self.state.value}")
        if self.log_path.exists():
            raise SessionStartError(f"log file {self.log_path} already exists; refusing to overwrite")
        for ref in self.devices:
            client = MqttClient(ref.host, ref.port, client_id=f"orchestrator-{ref.device_id}")
            try:
                client.connect()
            except ConnectError as exc:
                for connected in self._clients.values():
                    connected.disconnect()
                self._clients.clear()
                raise SessionStartError(f"device {ref.device_id} unreachable: {exc}") from exc
            client.on_session_error = lambda e, d=ref.device_id: self._enqueue_broker_loss(d, e)
            self._clients[ref.device_id] = client
        try:
            self._recorder = SessionRecorder(self.log_path, on_degraded=self._on_degraded)
        except RecorderError as exc:
            for connected in self._clients.values():
                connected.disconnect()
            self._clients.clear()
            raise SessionStartError(str(exc)) from exc

        self.state = SessionState.ACTIVE
        self._router = threading.Thread(target=self._route_loop, name="session-router", daemon=True)
        self._router.start()
        # first segment applies before subscribing so every recorded hr/bvp
        # message carries modality+movie tags (retained hr can arrive the
        # moment a subscription lands)
        self.next_segment()
        for ref in self.devices:
            client = self._clients[ref.device_id]
            for channel in ("hr", "bvp", "beat_event", "status"):
                client.subscribe(
                    device_topic(ref.device_id, channel),
                    lambda _t, payload, d=ref.device_id, c=channel: self._queue.put(
                        ("msg", d, c, payload)
                    ),
                )
        return self

    def stop(self) -> None:
        if self.state in (SessionState.IDLE, SessionState.STOPPED):
            self.state = SessionState.STOPPED
            return
        self._queue.put(("quit",))
        if self._router is not None:
            self._router.join(timeout=5.0)
        for client in self._clients.values():
            client.disconnect()
        if self._recorder is not None:
            self._recorder.close()
        self.state = SessionState.STOPPED
        self._emit_status()

    # -- operator operations ---------------------------------------------------

    def set_modality(self, modality: Modality | str, timeout: float = 5.0) -> None:
        if isinstance(modality, str):
            try:
                modality = Modality(modality)
            except ValueError:
                raise ValueError(f"unknown modality {modality!r}") from None
        self._control("set_modality", modality, timeout)

    def set_movie(self, title: str, timeout: float = 5.0) -> None:
        if not isinstance(title, str) or not title.strip():
            raise ValueError("movie title must be a non-empty string")
        self._control("set_movie", title, timeout)

    def next_segment(self, timeout: float = 5.0) -> bool:
        """Apply the plan's next (movie, modality); False when exhausted."""
        return bool(self._control("next_segment", None, timeout))

    def export_log(self, dest: str | Path | None = None) -> Path:
        if self._recorder is None:
            raise SessionStateError("session never started")
        return self._recorder.export(dest)

    def status(self) -> dict:
        return {
            "state": self.state.value,
            "pair_id": self.plan.pair_id,
            "segment_index": self.segment_index,
            "segment_count": len(self.plan.segments),
            "modality": self.modality.value if self.modality else None,
            "movie": self.movie,
            "devices": {
                ref.device_id: {
                    "last_bpm": self.last_hr.get(ref.device_id, (None, None))[1],
                    "last_hr_ts": self.last_hr.get(ref.device_id, (None, None))[0],
                }
                for ref in self.devices
            },
            "log_path": str(self.log_path),
        }

    def _control(self, op: str, value, timeout: float):
        if self.state not in (SessionState.ACTIVE, SessionState.DEGRADED):
            raise SessionStateError(f"session is {self.state.value}")
        done = threading.Event()
        reply: dict = {}
        self._queue.put(("ctl", op, value, reply, done))
        if not done.wait(timeout):
            raise SessionStateError(f"{op} timed out")
        if "error" in reply:
            raise reply["error"]
        return reply.get("result")

    # -- routing thread ----------------------------------------------------------

    def _route_loop(self) -> None:
        while True:
            item = self._queue.get()
            try:
                if item[0] == "quit":
                    return
                if item[0] == "msg":
                    self._handle_message(item[1], item[2], item[3])
                elif item[0] == "ctl":
                    self._handle_control(item[1], item[2], item[3], item[4])
                elif item[0] == "broker_loss":
                    self._emit_status(error=f"broker for {item[1]} lost: {item[2]}")
            except Exception:
                log.exception("routing failed for %s", item[0])

    def _now_ms(self) -> int:
        now = int(time.time() * 1000)
        self._last_ts = max(now, self._last_ts)
        return self._last_ts

    def _record(self, record: dict) -> None:
        if self._recorder is not None:
            self._recorder.write(record)

    def _tags(self) -> dict:
        return {
            "modality": self.modality.value if self.modality else None,
            "movie": self.movie,
        }

    def _handle_message(self, device_id: str, channel: str, payload: bytes) -> None:
        try:
            body = json.loads(payload)
        except ValueError:
            log.warning("unparseable %s payload from %s", channel, device_id)
            return
        ts = self._now_ms()
        if channel == "hr":
            bpm = float(body["bpm"])
            self._record({"ts": ts, "kind": "hr", "device": device_id, **self._tags(), "bpm": bpm})
            self.last_hr[device_id] = (ts, bpm)
            self._emit({"type": "hr", "device": device_id, "bpm": bpm, "ts": ts})
            target = self._rule.get(device_id)
            if target is not None:
                self._send_beat_rate(target, bpm)
        elif channel == "bvp":
            self._record(
                {"ts": ts, "kind": "bvp_batch", "device": device_id, **self._tags(), "samples": body}
            )
        elif channel == "beat_event":
            bpm = body.get("bpm")
            self._record(
                {"ts": ts, "kind": "beat_event", "device": device_id, **self._tags(), "bpm": bpm}
            )
            self._emit({"type": "beat_event", "device": device_id, "bpm": bpm, "ts": ts})
        elif channel == "status":
            self._emit_status(device=device_id, device_event=body)

    def _send_beat_rate(self, target: str, value: float | str) -> None:
        client = self._clients.get(target)
        if client is None:
            return
        try:
            client.publish(device_topic(target, "beat_rate"), json.dumps(value))
        except Exception as exc:
            log.warning("beat_rate to %s failed: %s", target, exc)
            self._emit_status(error=f"beat_rate to {target} failed: {exc}")

    def _handle_control(self, op: str, value, reply: dict, done: threading.Event) -> None:
        try:
            if op == "set_modality":
                self._apply_modality(value)
            elif op == "set_movie":
                self._apply_movie(value)
            elif op == "next_segment":
                reply["result"] = self._apply_next_segment()
            else:
                raise ValueError(f"unknown control op {op}")
        except Exception as exc:
            reply["error"] = exc
        finally:
            done.set()

    def _apply_modality(self, modality: Modality) -> None:
        a, b = (ref.device_id for ref in self.devices)
        self._rule = routing_for(modality, a, b)
        self.modality = modality
        ts = self._now_ms()
        self._record({"ts": ts, "kind": "modality_change", "device": None, **self._tags()})
        if modality is Modality.WithoutHeart:
            for device_id in (a, b):
                self._send_beat_rate(device_id, "stop")
        self._emit_status()

    def _apply_movie(self, title: str) -> None:
        # repeated title still logs a (no-op) movie_change record
        self.movie = title
        ts = self._now_ms()
        self._record({"ts": ts, "kind": "movie_change", "device": None, **self._tags()})
        self._emit_status()

    def _apply_next_segment(self) -> bool:
        if self.segment_index + 1 >= len(self.plan.segments):
            return False
        self.segment_index += 1
        segment = self.plan.segments[self.segment_index]
        self._apply_movie(segment.movie)
        self._apply_modality(segment.modality)
        return True

    # -- failure paths -------------------------------------------------------------

    def _on_degraded(self, exc: Exception) -> None:
        self.state = SessionState.DEGRADED
        self._emit_status(error=f"recording failed: {exc}")

    def _enqueue_broker_loss(self, device_id: str, exc: Exception) -> None:
        self._queue.put(("broker_loss", device_id, str(exc)))
