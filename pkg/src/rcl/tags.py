"""Logical time: nanosecond time values and superdense tags.

A time value is a plain ``int`` counting nanoseconds since logical program
start.  A :class:`Tag` pairs a time value with a microstep; tags order
lexicographically, which is exactly tuple ordering.
"""

from __future__ import annotations

import re
from typing import NamedTuple

from .errors import MicrostepOverflowError, TimeOverflowError

NSEC = 1
USEC = 1_000
MSEC = 1_000_000
SEC = 1_000_000_000
MINUTE = 60 * SEC

UNITS = {
    "ns": NSEC,
    "us": USEC,
    "ms": MSEC,
    "s": SEC,
    "sec": SEC,
    "min": MINUTE,
}

INT64_MAX = 2**63 - 1
INT64_MIN = -(2**63)
MICROSTEP_MAX = 2**32 - 1

_TIME_RE = re.compile(r"^\s*(-?\d+)\s*([a-z]*)\s*$")


class Tag(NamedTuple):
    time: int
    microstep: int = 0

    def __str__(self) -> str:
        return f"({format_time(self.time)}, {self.microstep})"


ZERO = Tag(0, 0)
# Sentinel meaning "no further events"; compares greater than every real tag.
FOREVER = Tag(INT64_MAX, MICROSTEP_MAX)


def parse_time(text: str) -> int:
    """Parse a time literal such as ``"30 ms"`` or ``"0"`` into nanoseconds."""
    m = _TIME_RE.match(text)
    if not m:
        raise ValueError(f"malformed time literal {text!r}")
    magnitude, unit = int(m.group(1)), m.group(2)
    if not unit:
        if magnitude != 0:
            raise ValueError(f"time literal {text!r} needs a unit")
        return 0
    if unit not in UNITS:
        raise ValueError(f"unknown time unit {unit!r}")
    return _checked_time(magnitude * UNITS[unit])


def format_time(ns: int) -> str:
    """Render nanoseconds with the largest unit that divides them exactly."""
    if ns == 0:
        return "0"
    for unit in ("min", "s", "ms", "us"):
        if ns % UNITS[unit] == 0:
            return f"{ns // UNITS[unit]} {unit}"
    return f"{ns} ns"


def _checked_time(ns: int) -> int:
    if ns > INT64_MAX or ns < INT64_MIN:
        raise TimeOverflowError(f"time value {ns} ns overflows 64 bits")
    return ns


def tag_compare(a: Tag, b: Tag) -> int:
    """Return -1, 0 or 1 as ``a`` is less than, equal to or greater than ``b``."""
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


def tag_delay(tag: Tag, delay: int) -> Tag:
    """Tag of an event conveyed with ``delay``.

    A positive delay moves the timestamp and resets the microstep; a zero
    delay yields the next microstep at the same time.
    """
    if delay < 0:
        raise ValueError(f"negative delay {delay}")
    if tag == FOREVER:
        return FOREVER
    if delay == 0:
        if tag.microstep >= MICROSTEP_MAX:
            raise MicrostepOverflowError(f"microstep overflow at {tag}")
        return Tag(tag.time, tag.microstep + 1)
    return Tag(_checked_time(tag.time + delay), 0)


def timer_next(offset: int, period: int, index: int) -> Tag:
    """Tag of occurrence ``index`` (0-based) of a timer."""
    if index < 0:
        raise ValueError("occurrence index must be non-negative")
    if index > 0 and period <= 0:
        raise ValueError("a one-shot timer has only occurrence 0")
    return Tag(_checked_time(offset + index * period), 0)


def tag_to_json(tag: Tag) -> dict:
    return {"t": tag.time, "m": tag.microstep}


def tag_from_json(obj: dict) -> Tag:
    t, m = obj["t"], obj["m"]
    if not isinstance(t, int) or not isinstance(m, int) or isinstance(t, bool):
        raise ValueError(f"malformed tag {obj!r}")
    if m < 0 or m > MICROSTEP_MAX or t > INT64_MAX or t < INT64_MIN:
        raise ValueError(f"tag out of range {obj!r}")
    return Tag(t, m)
