"""A simulated heart-display device.

Runs the device's two jobs as threads talking to its own local broker:
acquisition + heart-rate estimation (sampler/estimator) and beat-interval
control of the actuator. Topics, all JSON:

    piheart/<id>/hr          out, retained   {"t_ms": ..., "bpm": ...}
    piheart/<id>/bvp         out             [[t_ms, value], ...] (1 s batches)
    piheart/<id>/beat_event  out             {"t_ms": ..., "bpm": ...}
    piheart/<id>/status      out             {"event": ..., ...}
    piheart/<id>/beat_rate   in              target bpm number, or "stop"
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from piheart.clock import SimClock
from piheart.estimator import (
    HrEstimate,
    NoDominantFrequencyError,
    SlidingWindow,
    StreamError,
)
from piheart.mqtt import MqttClient
from piheart.mqtt.topics import device_topic
from piheart.scheduler import BeatScheduler, RateBandError
from piheart.synth import BvpConfig, BvpSample, replay, synthesize

log = logging.getLogger(__name__)

DEFAULT_SYNTH_DURATION_S = 600.0


@dataclass
class DeviceConfig:
    device_id: str
    broker_host: str = "127.0.0.1"
    broker_port: int = 1883
    bvp_synth: BvpConfig | None = None
    bvp_replay_path: str | Path | None = None
    duration_s: float = DEFAULT_SYNTH_DURATION_S  # synth source length
    estimator_mode: str = "magnitude"
    clock_factor: float = 1.0
    profile_duration_ms: float = 300.0

    def __post_init__(self) -> None:
        if (self.bvp_synth is None) == (self.bvp_replay_path is None):
            raise ValueError("configure exactly one of bvp_synth or bvp_replay_path")


@dataclass(frozen=True)
class NodeStatus:
    device_id: str
    uptime_s: float
    samples_pushed: int
    last_estimate: HrEstimate | None
    estimates_published: int
    stream_gap_count: int
    beat_drop_count: int
    beats_executed: int
    stream_ended: bool
    error: str | None


class DeviceNode:
    """Sampler, estimator and actuator threads around one MQTT connection."""

    def __init__(self, config: DeviceConfig):
        self.config = config
        self.clock = SimClock(config.clock_factor)
        self._client = MqttClient(
            config.broker_host, config.broker_port, client_id=f"node-{config.device_id}"
        )
        self._scheduler = BeatScheduler(profile_duration_ms=config.profile_duration_ms)
        self._window = SlidingWindow(
            sample_rate_hz=self._sample_rate(), mode=config.estimator_mode
        )
        self._stop = threading.Event()
        self._stream_end = threading.Event()
        self._chunks: queue.Queue[list[BvpSample] | None] = queue.Queue()
        self._beat_mailbox: queue.Queue[tuple[str, float | None]] = queue.Queue()
        self._threads: list[threading.Thread] = []
        self._started_wall = 0.0
        # status counters (single-writer each; read unlocked for snapshots)
        self.samples_pushed = 0
        self.last_estimate: HrEstimate | None = None
        self.estimates_published = 0
        self.stream_gap_count = 0
        self.beats_executed = 0
        self.error: str | None = None

    def _sample_rate(self) -> float:
        if self.config.bvp_synth is not None:
            return self.config.bvp_synth.sample_rate_hz
        return 100.0

    def _topic(self, channel: str) -> str:
        return device_topic(self.config.device_id, channel)

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "DeviceNode":
        samples = self._load_samples()
        self._client.connect()
        self._client.on_session_error = self._on_session_error
        self._client.subscribe(self._topic("beat_rate"), self._on_beat_rate)
        self._started_wall = time.monotonic()
        self.clock = SimClock(self.config.clock_factor)
        self._threads = [
            threading.Thread(target=self._sampler_loop, args=(samples,), daemon=True),
            threading.Thread(target=self._estimator_loop, daemon=True),
            threading.Thread(target=self._actuator_loop, daemon=True),
        ]
        for t in self._threads:
            t.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=3.0)
        self._client.disconnect()

    def __enter__(self) -> "DeviceNode":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def wait_stream_end(self, timeout: float | None = None) -> bool:
        return self._stream_end.wait(timeout)

    def status(self) -> NodeStatus:
        return NodeStatus(
            device_id=self.config.device_id,
            uptime_s=time.monotonic() - self._started_wall if self._started_wall else 0.0,
            samples_pushed=self.samples_pushed,
            last_estimate=self.last_estimate,
            estimates_published=self.estimates_published,
            stream_gap_count=self.stream_gap_count,
            beat_drop_count=self._scheduler.drop_count,
            beats_executed=self.beats_executed,
            stream_ended=self._stream_end.is_set(),
            error=self.error,
        )

    # -- BVP source ----------------------------------------------------------

    def _load_samples(self) -> list[BvpSample]:
        if self.config.bvp_synth is not None:
            return synthesize(self.config.bvp_synth, self.config.duration_s)
        return replay(self.config.bvp_replay_path)

    # -- MQTT inbound ----------------------------------------------------------

    def _on_beat_rate(self, topic: str, payload: bytes) -> None:
        try:
            value = json.loads(payload)
        except ValueError:
            self._publish_status("bad_beat_rate", detail=repr(payload[:64]))
            return
        if value == "stop":
            self._beat_mailbox.put(("stop", None))
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            self._beat_mailbox.put(("rate", float(value)))
        else:
            self._publish_status("bad_beat_rate", detail=repr(value))

    def _on_session_error(self, exc: Exception) -> None:
        self.error = f"broker session lost: {exc}"
        self._stop.set()
        self._stream_end.set()

    # -- outbound helpers ------------------------------------------------------

    def _publish(self, channel: str, payload: str, retain: bool = False) -> None:
        try:
            self._client.publish(self._topic(channel), payload, retain=retain)
        except Exception as exc:
            if self.error is None:
                self.error = f"publish failed: {exc}"
            self._stop.set()

    def _publish_status(self, event: str, **fields) -> None:
        body = {"event": event, "t_ms": round(self.clock.signal_now_ms()), **fields}
        self._publish("status", json.dumps(body))

    # -- worker loops ------------------------------------------------------------

    def _sampler_loop(self, samples: list[BvpSample]) -> None:
        chunk_size = max(1, round(self._sample_rate()))  # 1 s of signal per batch
        for start in range(0, len(samples), chunk_size):
            chunk = samples[start : start + chunk_size]
            if not self.clock.wait_until_signal_ms(chunk[-1].t, self._stop):
                break
            self._publish("bvp", json.dumps([[s.t, s.value] for s in chunk]))
            self._chunks.put(chunk)
            self.samples_pushed += len(chunk)
        self._chunks.put(None)
        if not self._stop.is_set():
            self._publish_status("stream_end")

    def _estimator_loop(self) -> None:
        while not self._stop.is_set():
            chunk = self._chunks.get()
            if chunk is None:
                break
            for sample in chunk:
                try:
                    estimate = self._window.push((sample.t, sample.value))
                except StreamError as exc:
                    self.stream_gap_count += 1
                    self._window.reset()
                    self._publish_status("stream_error", detail=str(exc))
                    continue
                except NoDominantFrequencyError as exc:
                    self._publish_status("no_dominant_frequency", detail=str(exc))
                    continue
                if estimate is not None:
                    self._publish_hr(estimate)
        self._stream_end.set()

    def _publish_hr(self, estimate: HrEstimate) -> None:
        self.last_estimate = estimate
        self.estimates_published += 1
        body = {"t_ms": estimate.window_end_t, "bpm": estimate.bpm}
        self._publish("hr", json.dumps(body), retain=True)

    def _actuator_loop(self) -> None:
        sched = self._scheduler
        while not self._stop.is_set():
            wait_wall = 0.05
            if sched.beating and sched.next_beat_t is not None:
                due_ms = sched.next_beat_t - self.clock.signal_now_ms()
                wait_wall = min(wait_wall, max(due_ms / 1000.0 / self.clock.factor, 0.0005))
            try:
                kind, value = self._beat_mailbox.get(timeout=wait_wall)
                if kind == "stop":
                    sched.stop()
                else:
                    try:
                        sched.set_rate(value)
                    except RateBandError as exc:
                        self._publish_status("beat_rate_rejected", detail=str(exc))
            except queue.Empty:
                pass
            now = self.clock.signal_now_ms()
            command = sched.tick(now)
            if command is None:
                continue
            profile = sched.execute_beat(command.t_ms)
            if profile is not None:
                self.beats_executed += 1
                body = {"t_ms": round(command.t_ms), "bpm": sched.current_bpm}
                self._publish("beat_event", json.dumps(body))


def run_node(config: DeviceConfig) -> DeviceNode:
    """Start a device node; returns the running handle."""
    return DeviceNode(config).start()
