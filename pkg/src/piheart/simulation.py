"""Whole deployment in one process: a broker per device, two device nodes,
and the orchestrator session wired across both brokers. Used by the demo CLI
and the end-to-end tests."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from piheart.mqtt import MqttBroker
from piheart.node import DeviceConfig, DeviceNode
from piheart.orchestrator import DeviceRef, Session, SessionPlan, generate_condition_orders
from piheart.synth import BvpConfig, HrProfile

log = logging.getLogger(__name__)


def ramp_profile(start_bpm: float, end_bpm: float, duration_s: float) -> HrProfile:
    return HrProfile(points=((0.0, start_bpm), (duration_s, end_bpm)), ramp=True)


@dataclass
class SimulationConfig:
    log_path: Path
    plan: SessionPlan = field(default_factory=lambda: generate_condition_orders(1, seed=0)[0])
    bvp_a: BvpConfig = field(default_factory=lambda: BvpConfig(hr_profile=HrProfile.constant(72.0), seed=11))
    bvp_b: BvpConfig = field(default_factory=lambda: BvpConfig(hr_profile=HrProfile.constant(64.0), seed=22))
    duration_s: float = 600.0
    accel: float = 100.0
    device_ids: tuple[str, str] = ("A", "B")


class LocalSimulation:
    """Brokers come up first; the session subscribes before any node starts
    publishing, so the log sees every estimator hop."""

    def __init__(self, config: SimulationConfig):
        self.config = config
        self.brokers: dict[str, MqttBroker] = {}
        self.nodes: dict[str, DeviceNode] = {}
        self._session: Session | None = None

    def start_brokers(self) -> "LocalSimulation":
        for device_id in self.config.device_ids:
            self.brokers[device_id] = MqttBroker().start()
        return self

    def device_refs(self) -> tuple[DeviceRef, DeviceRef]:
        a, b = self.config.device_ids
        return (
            DeviceRef(a, self.brokers[a].host, self.brokers[a].port),
            DeviceRef(b, self.brokers[b].host, self.brokers[b].port),
        )

    def build_session(self) -> Session:
        ref_a, ref_b = self.device_refs()
        self._session = Session(self.config.plan, ref_a, ref_b, self.config.log_path)
        return self._session

    def start_nodes(self) -> None:
        sources = dict(zip(self.config.device_ids, (self.config.bvp_a, self.config.bvp_b)))
        for device_id, bvp in sources.items():
            broker = self.brokers[device_id]
            self.nodes[device_id] = DeviceNode(
                DeviceConfig(
                    device_id=device_id,
                    broker_host=broker.host,
                    broker_port=broker.port,
                    bvp_synth=bvp,
                    duration_s=self.config.duration_s,
                    clock_factor=self.config.accel,
                )
            ).start()

    def stop(self) -> None:
        for node in self.nodes.values():
            node.stop()
        self.nodes.clear()
        if self._session is not None and self._session.state.value != "STOPPED":
            try:
                self._session.stop()
            except Exception:
                log.exception("session stop failed")
        for broker in self.brokers.values():
            broker.stop()
        self.brokers.clear()
