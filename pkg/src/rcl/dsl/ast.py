"""Syntax tree for reactor sources.

Nodes are frozen dataclasses; source locations are excluded from equality
so that a re-parsed pretty-print compares equal to the original.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Union


@dataclass(frozen=True)
class Loc:
    line: int
    col: int


def _loc():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class TimeExpr:
    """A time literal (``ns``) or a reference to a time/int parameter."""
    ns: Optional[int] = None
    param: Optional[str] = None
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Literal:
    value: Any
    is_time: bool = False
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class ParamRef:
    name: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class ParamDecl:
    name: str
    type: str
    default: Literal
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class PortDecl:
    name: str
    direction: str  # "input" | "output"
    type: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class TimerDecl:
    name: str
    offset: TimeExpr
    period: TimeExpr
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class ActionDecl:
    name: str
    origin: str  # "logical" | "physical"
    min_delay: Optional[TimeExpr]
    type: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class StateDecl:
    name: str
    type: str
    init: Optional[Literal]
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Instantiation:
    name: str
    reactor: str
    args: tuple[tuple[str, Union[Literal, ParamRef]], ...] = ()
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class PortRef:
    parts: tuple[str, ...]
    loc: Optional[Loc] = _loc()

    def __str__(self) -> str:
        return ".".join(self.parts)


@dataclass(frozen=True)
class ConnectionDecl:
    src: PortRef
    dst: PortRef
    delay: Optional[TimeExpr] = None
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Body:
    kind: str  # "script" | "extern"
    text: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Handler:
    bound: TimeExpr
    body: Body
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class ReactionDecl:
    triggers: tuple[PortRef, ...]
    sources: tuple[PortRef, ...]
    effects: tuple[PortRef, ...]
    body: Body
    deadline: Optional[Handler] = None
    stp: Optional[Handler] = None
    # set by the behavior-tree compiler: port receiving the body's return value
    result_port: Optional[str] = None
    loc: Optional[Loc] = _loc()


Member = Union[ParamDecl, PortDecl, TimerDecl, ActionDecl, StateDecl,
               Instantiation, ConnectionDecl, ReactionDecl]


@dataclass(frozen=True)
class ReactorDef:
    name: str
    kind: str  # "reactor" | "main" | "federated"
    params: tuple[ParamDecl, ...] = ()
    members: tuple[Member, ...] = ()
    loc: Optional[Loc] = _loc()

    def of(self, cls) -> list:
        return [m for m in self.members if isinstance(m, cls)]

    @property
    def is_main(self) -> bool:
        return self.kind in ("main", "federated")


@dataclass(frozen=True)
class BtPortDecl:
    direction: str  # "in" | "out"
    name: str
    type: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class BtNodeDecl:
    kind: str  # "sequence" | "fallback" | "action" | "condition"
    name: str
    children: tuple[BtNodeDecl, ...] = ()
    ports: tuple[BtPortDecl, ...] = ()
    body: Optional[Body] = None
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class WireDecl:
    src: PortRef
    dst: PortRef
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class BehaviorDef:
    name: str
    root: Optional[BtNodeDecl]
    wires: tuple[WireDecl, ...] = ()
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Program:
    target: Optional[str]
    reactors: tuple[ReactorDef, ...] = ()
    behaviors: tuple[BehaviorDef, ...] = ()

    @property
    def main(self) -> Optional[ReactorDef]:
        for r in self.reactors:
            if r.is_main:
                return r
        return None

    def reactor(self, name: str) -> Optional[ReactorDef]:
        for r in self.reactors:
            if r.name == name:
                return r
        return None
