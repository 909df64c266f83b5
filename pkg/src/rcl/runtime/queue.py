"""Tag-ordered event queue."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, Optional

from ..errors import TagInPastError
from ..tags import Tag


@dataclass(order=True)
class Event:
    tag: Tag
    seq: int
    trigger: str = field(compare=False)
    value: Any = field(compare=False, default=None)
    late: Optional[int] = field(compare=False, default=None)  # lateness ns for stp faults


class EventQueue:
    """Min-heap on (tag, insertion order); FIFO among equal tags."""

    def __init__(self):
        self._heap: list[Event] = []
        self._seq = itertools.count()
        self.current: Optional[Tag] = None  # last tag popped
        self.assembling = True  # startup assembly allows the current tag

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, tag: Tag, trigger: str, value: Any = None, late: Optional[int] = None) -> Event:
        if self.current is not None:
            if tag < self.current or (tag == self.current and not self.assembling):
                raise TagInPastError(f"event for {trigger} at {tag} is not after the current tag {self.current}")
        ev = Event(tag, next(self._seq), trigger, value, late)
        heapq.heappush(self._heap, ev)
        return ev

    def peek_tag(self) -> Optional[Tag]:
        return self._heap[0].tag if self._heap else None

    def pop_tag(self) -> tuple[Tag, list[Event]]:
        """Remove and return every event at the earliest tag, in insertion order."""
        if not self._heap:
            raise IndexError("pop from empty event queue")
        tag = self._heap[0].tag
        batch = []
        while self._heap and self._heap[0].tag == tag:
            batch.append(heapq.heappop(self._heap))
        self.current = tag
        self.assembling = False
        return tag, batch
