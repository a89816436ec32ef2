import json
import threading
import time

import pytest

from piheart.estimator import estimate_stream
from piheart.mqtt import MqttBroker, MqttClient
from piheart.node import DeviceConfig, DeviceNode, run_node
from piheart.synth import BvpConfig, HrProfile, synthesize, write_csv


class TopicLog:
    def __init__(self):
        self.by_channel = {}
        self._lock = threading.Lock()

    def callback(self, topic, payload):
        channel = topic.rsplit("/", 1)[1]
        with self._lock:
            self.by_channel.setdefault(channel, []).append(json.loads(payload))

    def get(self, channel):
        with self._lock:
            return list(self.by_channel.get(channel, []))

    def wait_for(self, channel, count, timeout=10.0):
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if len(self.get(channel)) >= count:
                return self.get(channel)
            time.sleep(0.01)
        return self.get(channel)


@pytest.fixture
def broker():
    b = MqttBroker().start()
    yield b
    b.stop()


@pytest.fixture
def watcher(broker):
    c = MqttClient(broker.host, broker.port, "watcher").connect()
    log = TopicLog()
    c.subscribe("piheart/+/hr", log.callback)
    c.subscribe("piheart/+/beat_event", log.callback)
    c.subscribe("piheart/+/status", log.callback)
    c.subscribe("piheart/+/bvp", log.callback)
    yield broker, c, log
    c.disconnect()


def synth_config(bpm=72.0):
    return BvpConfig(hr_profile=HrProfile.constant(bpm), seed=1)


def node_config(broker, duration_s=60.0, accel=100.0, **kw):
    return DeviceConfig(
        device_id="dev1",
        broker_host=broker.host,
        broker_port=broker.port,
        bvp_synth=synth_config(),
        duration_s=duration_s,
        clock_factor=accel,
        **kw,
    )


class TestNodePipeline:
    def test_hr_cadence_first_at_30s_then_every_7_5s(self, watcher):
        broker, _, log = watcher
        node = run_node(node_config(broker, duration_s=60.0))
        try:
            assert node.wait_stream_end(timeout=15.0)
            hr = log.wait_for("hr", 5)
            assert [m["t_ms"] for m in hr] == [29990, 37490, 44990, 52490, 59990]
            # clean 72 bpm source: every estimate on the money
            assert all(m["bpm"] == pytest.approx(72.0) for m in hr)
        finally:
            node.stop()

    def test_bvp_batches_of_one_second(self, watcher):
        broker, _, log = watcher
        node = run_node(node_config(broker, duration_s=35.0))
        try:
            assert node.wait_stream_end(timeout=10.0)
            batches = log.wait_for("bvp", 35)
            assert len(batches) == 35
            assert all(len(batch) == 100 for batch in batches)
            # batch boundary carries the first sample's timestamp
            assert [batch[0][0] for batch in batches[:3]] == [0, 1000, 2000]
        finally:
            node.stop()

    def test_pipeline_equals_batch_estimator_on_replay(self, watcher, tmp_path):
        broker, _, log = watcher
        samples = synthesize(BvpConfig(hr_profile=HrProfile.constant(64.0), seed=3), 60.0)
        path = tmp_path / "stream.csv"
        write_csv(samples, path)
        expected = estimate_stream((round(s.t), s.value) for s in replayed(path))
        node = run_node(
            DeviceConfig(
                device_id="dev1",
                broker_host=broker.host,
                broker_port=broker.port,
                bvp_replay_path=path,
                clock_factor=100.0,
            )
        )
        try:
            assert node.wait_stream_end(timeout=15.0)
            hr = log.wait_for("hr", len(expected))
            assert [(m["t_ms"], m["bpm"]) for m in hr] == [
                (e.window_end_t, e.bpm) for e in expected
            ]
        finally:
            node.stop()

    def test_stream_gap_counted_and_reported(self, watcher, tmp_path):
        broker, _, log = watcher
        samples = synthesize(synth_config(), 40.0)
        gappy = samples[:1000] + samples[1100:]  # 1 s of samples lost
        path = tmp_path / "gappy.csv"
        write_csv(gappy, path)
        node = run_node(
            DeviceConfig(
                device_id="dev1",
                broker_host=broker.host,
                broker_port=broker.port,
                bvp_replay_path=path,
                clock_factor=100.0,
            )
        )
        try:
            assert node.wait_stream_end(timeout=15.0)
            assert node.status().stream_gap_count == 1
            events = [m["event"] for m in log.get("status")]
            assert "stream_error" in events
        finally:
            node.stop()


class TestActuator:
    def test_no_beat_rate_means_no_beats(self, watcher):
        broker, _, log = watcher
        node = run_node(node_config(broker, duration_s=35.0))
        try:
            assert node.wait_stream_end(timeout=10.0)
            assert log.get("beat_event") == []
            assert node.status().beats_executed == 0
        finally:
            node.stop()

    def test_beat_rate_drives_cadence(self, watcher):
        broker, control, log = watcher
        node = run_node(node_config(broker, duration_s=120.0, accel=50.0))
        try:
            control.publish("piheart/dev1/beat_rate", json.dumps(60))
            events = log.wait_for("beat_event", 12, timeout=20.0)
            assert len(events) >= 12
            assert all(e["bpm"] == 60 for e in events)
            gaps = [b["t_ms"] - a["t_ms"] for a, b in zip(events, events[1:])]
            # signal-time cadence 1000 ms, modulo actuator wakeup jitter
            assert sum(gaps) / len(gaps) == pytest.approx(1000.0, rel=0.15)
            control.publish("piheart/dev1/beat_rate", json.dumps("stop"))
            time.sleep(0.3)
            count = len(log.get("beat_event"))
            time.sleep(0.5)
            assert len(log.get("beat_event")) <= count + 1  # stopped
        finally:
            node.stop()

    def test_invalid_beat_rate_reported(self, watcher):
        broker, control, log = watcher
        node = run_node(node_config(broker, duration_s=40.0))
        try:
            control.publish("piheart/dev1/beat_rate", json.dumps(20))  # below band
            control.publish("piheart/dev1/beat_rate", b"not json{")
            deadline = time.monotonic() + 5.0
            events = []
            while time.monotonic() < deadline and len(events) < 2:
                events = [
                    m["event"]
                    for m in log.get("status")
                    if m["event"] in ("beat_rate_rejected", "bad_beat_rate")
                ]
                time.sleep(0.02)
            assert sorted(events) == ["bad_beat_rate", "beat_rate_rejected"]
            assert node.status().beats_executed == 0
        finally:
            node.stop()


class TestStatus:
    def test_fresh_node_has_no_estimate(self, broker):
        node = DeviceNode(node_config(broker, duration_s=40.0))
        status = node.status()
        assert status.last_estimate is None
        assert status.samples_pushed == 0
        assert not status.stream_ended

    def test_last_estimate_matches_published(self, watcher):
        broker, _, log = watcher
        node = run_node(node_config(broker, duration_s=40.0))
        try:
            hr = log.wait_for("hr", 1)
            status = node.status()
            assert status.last_estimate is not None
            assert status.last_estimate.bpm == hr[0]["bpm"]
            assert status.estimates_published >= 1
            assert status.uptime_s > 0
        finally:
            node.stop()

    def test_broker_loss_stops_node_with_error(self):
        broker = MqttBroker().start()
        node = run_node(node_config(broker, duration_s=120.0, accel=10.0))
        try:
            broker.stop()
            deadline = time.monotonic() + 5.0
            while time.monotonic() < deadline and node.status().error is None:
                time.sleep(0.02)
            status = node.status()
            assert status.error is not None and "session" in status.error
            assert node.wait_stream_end(timeout=1.0)
        finally:
            node.stop()

    def test_config_requires_exactly_one_source(self, broker):
        with pytest.raises(ValueError):
            DeviceConfig(device_id="x", bvp_synth=None, bvp_replay_path=None)
        with pytest.raises(ValueError):
            DeviceConfig(device_id="x", bvp_synth=synth_config(), bvp_replay_path="y.csv")


def replayed(path):
    from piheart.synth import replay

    return replay(path)
