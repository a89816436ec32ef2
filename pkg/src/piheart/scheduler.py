"""Beat scheduling and the simulated servo sweep.

Converts a target heart rate into timed beat commands (one command per beat,
the firmware's single-command contract) and models the actuator: a full
0->180->0 degree sweep at full speed. Sweeps cannot queue; a beat that lands
while one is in flight is dropped and counted, which is what a saturated
servo does at very high rates.
"""

from __future__ import annotations

from dataclasses import dataclass

BPM_MIN = 40.0
BPM_MAX = 300.0

# Full sweep time for a small hobby servo running flat out; configurable.
DEFAULT_PROFILE_MS = 300.0


class RateBandError(ValueError):
    """Requested rate outside the 40-300 bpm band; state is unchanged."""


class NotBeatingError(RuntimeError):
    """execute_beat called while the actuator is stopped."""


@dataclass(frozen=True)
class BeatCommand:
    t_ms: float  # emission time


@dataclass(frozen=True)
class MotionProfile:
    """Symmetric sweep: (offset_ms, angle_deg) waypoints 0 -> 180 -> 0."""

    points: tuple[tuple[float, int], ...]
    duration_ms: float


class BeatScheduler:
    """Single-owner beat state driven by tick(now_ms) with monotone time.

    A new rate never reschedules the beat already pending; it applies from the
    following one. Beats missed during a stall are dropped, not queued. The
    LED flag exists for completeness and stays off (disabled in the study).
    """

    def __init__(self, profile_duration_ms: float = DEFAULT_PROFILE_MS, led_enabled: bool = False):
        if profile_duration_ms <= 0:
            raise ValueError("profile_duration_ms must be > 0")
        self.profile_duration_ms = profile_duration_ms
        self.led_enabled = led_enabled
        self.current_bpm: float | None = None
        self.beating = False
        self.next_beat_t: float | None = None
        self.drop_count = 0
        self._interval_ms = 0.0
        self._profile_start: float | None = None

    @property
    def interval_ms(self) -> float | None:
        return self._interval_ms if self.beating else None

    def set_rate(self, bpm: float) -> None:
        """Beats every 60000/bpm ms from the next scheduled beat onward."""
        if not BPM_MIN <= bpm <= BPM_MAX:
            raise RateBandError(f"bpm {bpm} outside [{BPM_MIN:g}, {BPM_MAX:g}]")
        self.current_bpm = float(bpm)
        self._interval_ms = 60000.0 / bpm
        if not self.beating:
            self.beating = True
            self.next_beat_t = None  # armed; first tick schedules one interval out

    def stop(self) -> None:
        self.beating = False
        self.current_bpm = None
        self.next_beat_t = None

    def tick(self, now_ms: float) -> BeatCommand | None:
        """Emit at most one command, when now reaches the scheduled beat.

        After a stall the skipped beats are gone; the cadence restarts one
        interval after the late emission.
        """
        if not self.beating:
            return None
        if self.next_beat_t is None:
            self.next_beat_t = now_ms + self._interval_ms
            return None
        if now_ms < self.next_beat_t:
            return None
        self.next_beat_t += self._interval_ms
        if self.next_beat_t <= now_ms:
            self.next_beat_t = now_ms + self._interval_ms
        return BeatCommand(t_ms=now_ms)

    def execute_beat(self, now_ms: float) -> MotionProfile | None:
        """Run one sweep; None (and a counted drop) if the previous sweep is
        still in flight."""
        if not self.beating:
            raise NotBeatingError("actuator is stopped")
        if (
            self._profile_start is not None
            and now_ms - self._profile_start < self.profile_duration_ms
        ):
            self.drop_count += 1
            return None
        self._profile_start = now_ms
        d = self.profile_duration_ms
        return MotionProfile(points=((0.0, 0), (d / 2.0, 180), (d, 0)), duration_ms=d)
