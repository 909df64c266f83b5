"""Physical clocks: the host monotonic clock and a test-controlled virtual one."""

from __future__ import annotations

import threading
import time


class MonotonicClock:
    """Nanoseconds since construction, from the host monotonic clock."""

    virtual = False

    def __init__(self, start_ns: int | None = None):
        self.start = time.monotonic_ns() if start_ns is None else start_ns

    def now(self) -> int:
        return time.monotonic_ns() - self.start

    def sleep_until(self, t: int, cond: threading.Condition) -> None:
        # caller holds cond; wakes early on notify
        remaining = t - self.now()
        if remaining > 0:
            cond.wait(remaining / 1e9)


class VirtualClock:
    """A clock that only moves when told to.  Thread-safe and nondecreasing."""

    virtual = True

    def __init__(self, start: int = 0):
        self._t = start
        self._lock = threading.Lock()

    def now(self) -> int:
        with self._lock:
            return self._t

    def advance_to(self, t: int) -> int:
        with self._lock:
            self._t = max(self._t, t)
            return self._t

    def stall(self, d: int) -> int:
        if d < 0:
            raise ValueError("stall must be non-negative")
        with self._lock:
            self._t += d
            return self._t

    def sleep_until(self, t: int, cond: threading.Condition) -> None:
        self.advance_to(t)
