"""Signal-time clock with optional acceleration.

Device nodes run on signal time (the sample timeline); a factor of 100 plays
100 seconds of signal per wall-clock second, scaling sample pacing, hop
cadence and beat intervals uniformly.
"""

from __future__ import annotations

import threading
import time


class SimClock:
    def __init__(self, factor: float = 1.0):
        if factor <= 0:
            raise ValueError("clock factor must be > 0")
        self.factor = factor
        self._start = time.monotonic()

    def signal_now_ms(self) -> float:
        return (time.monotonic() - self._start) * 1000.0 * self.factor

    def wait_until_signal_ms(self, t_ms: float, stop: threading.Event | None = None) -> bool:
        """Sleep until signal time reaches t_ms. Returns False if stop fired first."""
        wall_target = self._start + t_ms / 1000.0 / self.factor
        while True:
            delay = wall_target - time.monotonic()
            if delay <= 0:
                return True
            if stop is None:
                time.sleep(min(delay, 0.5))
            elif stop.wait(min(delay, 0.5)):
                return False
