"""Append-only JSONL session log.

One JSON object per line with orchestrator wall-clock timestamps:
    {"ts": <int ms>, "kind": "hr"|"bvp_batch"|"modality_change"|"movie_change"|
     "beat_event", "device": <id or null>, "modality": ..., "movie": ...,
     + kind-specific payload ("bpm" for hr/beat_event, "samples" for bvp_batch)}

A write failure must not take the feedback loop down: the recorder flips to
degraded, reports once, and drops further records.
"""

from __future__ import annotations

import json
import queue
import shutil
import threading
from pathlib import Path
from typing import Callable

KINDS = ("hr", "bvp_batch", "modality_change", "movie_change", "beat_event")

_REQUIRED_BY_KIND = {
    "hr": ("bpm",),
    "bvp_batch": ("samples",),
    "beat_event": ("bpm",),
    "modality_change": (),
    "movie_change": (),
}


class RecorderError(RuntimeError):
    """Log file cannot be created (already exists, unwritable path, ...)."""


class SessionRecorder:
    """Dedicated writer thread fed through a queue; never blocks the caller."""

    def __init__(self, path: str | Path, on_degraded: Callable[[Exception], None] | None = None):
        self.path = Path(path)
        self.on_degraded = on_degraded
        self.degraded = False
        self.records_written = 0
        try:
            # exclusive create: an existing log is never silently overwritten
            self._file = open(self.path, "x", encoding="utf-8", newline="\n")
        except FileExistsError:
            raise RecorderError(f"log file {self.path} already exists") from None
        except OSError as exc:
            raise RecorderError(f"cannot create log file {self.path}: {exc}") from exc
        self._queue: queue.Queue[dict | None] = queue.Queue()
        self._thread = threading.Thread(target=self._write_loop, name="session-recorder", daemon=True)
        self._thread.start()

    def write(self, record: dict) -> None:
        if not self.degraded:
            self._queue.put(record)

    def flush(self) -> None:
        """Block until everything queued so far is on disk."""
        self._queue.join()
        if not self.degraded:
            try:
                self._file.flush()
            except OSError:
                pass

    def close(self) -> None:
        self.flush()
        self._queue.put(None)
        self._thread.join(timeout=3.0)
        try:
            self._file.close()
        except OSError:
            pass

    def export(self, dest: str | Path | None = None) -> Path:
        """Consistent snapshot: everything queued is flushed first."""
        self.flush()
        if dest is None:
            return self.path
        dest = Path(dest)
        shutil.copyfile(self.path, dest)
        return dest

    def _write_loop(self) -> None:
        while True:
            record = self._queue.get()
            try:
                if record is None:
                    return
                if self.degraded:
                    continue
                try:
                    self._file.write(json.dumps(record) + "\n")
                    self.records_written += 1
                except (OSError, TypeError, ValueError) as exc:
                    self.degraded = True
                    if self.on_degraded is not None:
                        self.on_degraded(exc)
            finally:
                self._queue.task_done()


def validate_log(path: str | Path) -> list[str]:
    """Schema and monotonicity check; returns problems as 'line N: ...'."""
    problems = []
    last_ts = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except ValueError:
                problems.append(f"line {lineno}: not valid JSON")
                continue
            ts = record.get("ts")
            if not isinstance(ts, int):
                problems.append(f"line {lineno}: missing integer ts")
            elif last_ts is not None and ts < last_ts:
                problems.append(f"line {lineno}: ts {ts} decreases (previous {last_ts})")
            else:
                last_ts = ts
            kind = record.get("kind")
            if kind not in KINDS:
                problems.append(f"line {lineno}: unknown kind {kind!r}")
                continue
            for field in _REQUIRED_BY_KIND[kind]:
                if field not in record:
                    problems.append(f"line {lineno}: {kind} record missing {field!r}")
            if kind in ("hr", "bvp_batch") and (
                record.get("modality") is None or record.get("movie") is None
            ):
                problems.append(f"line {lineno}: {kind} record missing modality/movie tags")
    return problems


def replay_bpm_series(path: str | Path) -> dict[str, list[tuple[int, float]]]:
    """Reconstruct the per-device bpm time series from a log."""
    series: dict[str, list[tuple[int, float]]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            record = json.loads(line)
            if record.get("kind") == "hr":
                series.setdefault(record["device"], []).append((record["ts"], record["bpm"]))
    return series
