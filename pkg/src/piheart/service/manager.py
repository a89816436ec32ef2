"""Session lifecycle wrapper behind the service endpoints.

Holds at most one session, fans its events out to bridge subscribers, and
keeps working when no session exists yet (the console can connect first and
send "start").
"""

from __future__ import annotations

import logging
import threading
from typing import Callable

from piheart.orchestrator import Session, SessionState, SessionStateError

log = logging.getLogger(__name__)

EventListener = Callable[[dict], None]


class SessionManager:
    def __init__(
        self,
        session_factory: Callable[[], Session],
        on_started: Callable[[Session], None] | None = None,
        on_stopped: Callable[[], None] | None = None,
    ):
        self._factory = session_factory
        self._on_started = on_started
        self._on_stopped = on_stopped
        self._session: Session | None = None
        self._listeners: list[EventListener] = []
        self._lock = threading.Lock()

    # -- events --------------------------------------------------------------

    def subscribe(self, listener: EventListener) -> Callable[[], None]:
        self._listeners.append(listener)

        def unsubscribe() -> None:
            if listener in self._listeners:
                self._listeners.remove(listener)

        return unsubscribe

    def _fanout(self, event: dict) -> None:
        for listener in list(self._listeners):
            try:
                listener(event)
            except Exception:
                log.exception("bridge listener failed")

    def initial_events(self) -> list[dict]:
        """Snapshot for a newly connected console: status, then the last known
        heart rate per device (backed by the brokers' retained hr)."""
        events: list[dict] = [{"type": "status", **self.status()}]
        session = self._session
        if session is not None:
            for device_id, (ts, bpm) in session.last_hr.items():
                events.append({"type": "hr", "device": device_id, "bpm": bpm, "ts": ts})
        return events

    # -- lifecycle -------------------------------------------------------------

    @property
    def session(self) -> Session | None:
        return self._session

    def start(self) -> dict:
        with self._lock:
            if self._session is not None and self._session.state in (
                SessionState.ACTIVE,
                SessionState.DEGRADED,
            ):
                raise SessionStateError("session already running")
            session = self._factory()
            session.add_listener(self._fanout)
            self._session = session
            session.start()
            if self._on_started is not None:
                self._on_started(session)
            return self.status()

    def stop(self) -> dict:
        with self._lock:
            if self._session is None:
                raise SessionStateError("no session")
            self._session.stop()
            if self._on_stopped is not None:
                self._on_stopped()
            return self.status()

    def set_modality(self, value: str) -> None:
        self._require_session().set_modality(value)

    def set_movie(self, value: str) -> None:
        self._require_session().set_movie(value)

    def next_segment(self) -> bool:
        return self._require_session().next_segment()

    def export_log(self, dest=None):
        return self._require_session().export_log(dest)

    def status(self) -> dict:
        if self._session is None:
            return {"state": "IDLE", "pair_id": None, "segment_index": None,
                    "segment_count": None, "modality": None, "movie": None,
                    "devices": {}, "log_path": None}
        return self._session.status()

    def _require_session(self) -> Session:
        if self._session is None:
            raise SessionStateError("no session; start one first")
        return self._session
