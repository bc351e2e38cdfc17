"""Injectable clocks so rate-limited code can run against simulated time."""

from __future__ import annotations

import threading
import time


class SystemClock:
    """Monotonic wall clock."""

    def now(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class SimulatedClock:
    """Virtual clock; ``sleep`` advances time instantly.

    Safe to share between threads. Concurrent sleepers each advance the
    clock by their own amount, which is pessimistic (time only moves forward
    faster) and therefore fine for rate-limit assertions.
    """

    def __init__(self, start: float = 0.0) -> None:
        self._now = float(start)
        self._lock = threading.Lock()
        self.total_slept = 0.0

    def now(self) -> float:
        with self._lock:
            return self._now

    def sleep(self, seconds: float) -> None:
        if seconds <= 0:
            return
        with self._lock:
            self._now += seconds
            self.total_slept += seconds

    def advance_to(self, t: float) -> None:
        with self._lock:
            if t > self._now:
                self.total_slept += t - self._now
                self._now = t
