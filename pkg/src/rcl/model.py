"""Elaborated program: flattened instances, triggers, reactions, connections."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .dsl.ast import Body
from .values import encode_value

STARTUP = "startup"
SHUTDOWN = "shutdown"


@dataclass
class ReactorInstance:
    fqn: str
    cls: str
    params: dict
    state: dict  # initial values
    state_types: dict
    parent: Optional[str]
    federate: Optional[str] = None


@dataclass(frozen=True)
class PortInstance:
    fqn: str
    owner: str
    direction: str
    type: str


@dataclass(frozen=True)
class TimerInstance:
    fqn: str
    owner: str
    offset: int
    period: int


@dataclass(frozen=True)
class ActionInstance:
    fqn: str
    owner: str
    origin: str
    min_delay: int
    type: str


@dataclass(frozen=True)
class HandlerInstance:
    bound: int
    body: Body


@dataclass
class ReactionInstance:
    name: str  # e.g. "vision.camera.reaction1"
    owner: str
    index: int
    triggers: tuple  # fqns
    sources: tuple
    effects: tuple
    local: dict  # local name in the body -> fqn
    body: Body
    deadline: Optional[HandlerInstance] = None
    stp: Optional[HandlerInstance] = None
    result_port: Optional[str] = None  # fqn
    file: str = "<input>"
    compiled: Any = field(default=None, compare=False, repr=False)

    @property
    def deadline_ns(self) -> Optional[int]:
        return self.deadline.bound if self.deadline else None


@dataclass(frozen=True)
class Connection:
    """A flattened connection between two leaf-level ports."""
    src: str
    dst: str
    delay: Optional[int] = None  # None: delay-free; 0: one microstep
    stp: Optional[int] = None

    @property
    def id(self) -> str:
        return f"{self.src}->{self.dst}"


@dataclass
class InstanceGraph:
    reactors: dict = field(default_factory=dict)
    ports: dict = field(default_factory=dict)
    timers: dict = field(default_factory=dict)
    actions: dict = field(default_factory=dict)
    reactions: list = field(default_factory=list)
    connections: list = field(default_factory=list)
    # declared (unflattened) connections, used for DOT and partitioning
    declared: list = field(default_factory=list)
    federates: list = field(default_factory=list)
    coordination: Optional[str] = None

    def reaction(self, name: str) -> ReactionInstance:
        for r in self.reactions:
            if r.name == name:
                return r
        raise KeyError(name)

    def federate_of(self, fqn: str) -> Optional[str]:
        if not self.federates:
            return None
        top = fqn.split(".", 1)[0]
        return top if top in self.federates else None

    def to_canonical(self) -> dict:
        def body(b: Body | None):
            if b is None:
                return None
            return [b.kind, "\n".join(line.strip() for line in b.text.strip().splitlines())]

        def handler(h: HandlerInstance | None):
            return None if h is None else [h.bound, body(h.body)]

        return {
            "reactors": [[r.fqn, r.cls, sorted((k, encode_value(v)) for k, v in r.params.items()),
                          sorted((k, encode_value(v)) for k, v in r.state.items())]
                         for r in sorted(self.reactors.values(), key=lambda r: r.fqn)],
            "ports": sorted([p.fqn, p.direction, p.type] for p in self.ports.values()),
            "timers": sorted([t.fqn, t.offset, t.period] for t in self.timers.values()),
            "actions": sorted([a.fqn, a.origin, a.min_delay, a.type] for a in self.actions.values()),
            "reactions": [[r.name, list(r.triggers), list(r.sources), list(r.effects), body(r.body),
                           handler(r.deadline), handler(r.stp), r.result_port]
                          for r in sorted(self.reactions, key=lambda r: r.name)],
            "connections": sorted([c.src, c.dst, c.delay, c.stp] for c in self.connections),
            "federates": sorted(self.federates),
        }

    def digest(self) -> str:
        data = json.dumps(self.to_canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(data.encode()).hexdigest()

    def readers(self, port: str) -> list:
        return [r for r in self.reactions if port in r.triggers or port in r.sources]

    def writers(self, port: str) -> list:
        return [r for r in self.reactions if port in r.effects]
