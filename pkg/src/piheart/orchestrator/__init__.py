"""Session orchestration: modality routing between two devices, counter-
balanced session plans, and the append-only JSONL session log."""

from piheart.orchestrator.plans import (
    MOVIE_ORDER,
    Modality,
    Segment,
    SessionPlan,
    generate_condition_orders,
    load_plan,
    routing_for,
    save_plan,
)
from piheart.orchestrator.recorder import (
    RecorderError,
    SessionRecorder,
    replay_bpm_series,
    validate_log,
)
from piheart.orchestrator.session import (
    DeviceRef,
    Session,
    SessionStartError,
    SessionState,
    SessionStateError,
)

__all__ = [
    "MOVIE_ORDER",
    "Modality",
    "DeviceRef",
    "RecorderError",
    "Segment",
    "Session",
    "SessionPlan",
    "SessionRecorder",
    "SessionStartError",
    "SessionState",
    "SessionStateError",
    "generate_condition_orders",
    "load_plan",
    "replay_bpm_series",
    "routing_for",
    "save_plan",
    "validate_log",
]
