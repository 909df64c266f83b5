"""Flatten a validated program into an :class:`InstanceGraph`."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..errors import Diagnostic, DiagnosticError
from ..model import (SHUTDOWN, STARTUP, ActionInstance, Connection, HandlerInstance, InstanceGraph,
                     PortInstance, ReactionInstance, ReactorInstance, TimerInstance)
from ..values import coerce
from . import ast


@dataclass(frozen=True)
class Declared:
    src: str
    dst: str
    delay: Optional[int]
    owner: str
    loc: Optional[ast.Loc] = None


def _add_delay(a: Optional[int], b: Optional[int]) -> Optional[int]:
    if a is None:
        return b
    if b is None:
        return a
    return a + b


class Elaborator:
    def __init__(self, program: ast.Program, filename: str = "<input>"):
        self.program = program
        self.filename = filename
        self.defs = {r.name: r for r in program.reactors if not r.is_main}
        self.ig = InstanceGraph()
        self.diags: list[Diagnostic] = []

    def error(self, loc, message: str) -> None:
        line, col = (loc.line, loc.col) if loc is not None else (1, 1)
        self.diags.append(Diagnostic(line, col, message, file=self.filename))

    def run(self) -> InstanceGraph:
        main = self.program.main
        if main is None:
            raise DiagnosticError([Diagnostic(1, 1, "no main or federated reactor", file=self.filename)])
        self.instantiate(main, "main", {}, None, depth=0)
        if main.kind == "federated":
            self.ig.federates = [m.name for m in main.of(ast.Instantiation)]
            for r in self.ig.reactors.values():
                r.federate = self.ig.federate_of(r.fqn)
            for d in self.ig.declared:
                if d.owner != "main":
                    continue
                if self.ig.federate_of(d.src) != self.ig.federate_of(d.dst):
                    if d.delay is None or d.delay <= 0:
                        self.error(d.loc, f"cross-federate connection '{d.src} -> {d.dst}' needs a positive after-delay")
        self.flatten()
        if self.diags:
            raise DiagnosticError(self.diags)
        return self.ig

    # -- instances --------------------------------------------------------------

    def time(self, t: ast.TimeExpr, params: dict) -> int:
        return params[t.param] if t.param is not None else t.ns

    def instantiate(self, d: ast.ReactorDef, fqn: str, params: dict, parent: Optional[str], depth: int) -> None:
        if depth > 64:
            self.error(d.loc, f"instantiation nesting too deep at '{fqn}'")
            return
        child_prefix = "" if fqn == "main" else fqn + "."
        own = fqn + "."

        state, state_types = {}, {}
        for s in d.of(ast.StateDecl):
            state_types[s.name] = s.type
            state[s.name] = coerce(s.type, s.init.value) if s.init is not None else _zero(s.type)
        self.ig.reactors[fqn] = ReactorInstance(fqn, d.name or "main", params, state, state_types, parent)

        for p in d.of(ast.PortDecl):
            self.ig.ports[own + p.name] = PortInstance(own + p.name, fqn, p.direction, p.type)
        for t in d.of(ast.TimerDecl):
            self.ig.timers[own + t.name] = TimerInstance(own + t.name, fqn, self.time(t.offset, params),
                                                         self.time(t.period, params))
        for a in d.of(ast.ActionDecl):
            delay = self.time(a.min_delay, params) if a.min_delay is not None else 0
            self.ig.actions[own + a.name] = ActionInstance(own + a.name, fqn, a.origin, delay, a.type)

        children = {}
        for m in d.of(ast.Instantiation):
            cls = self.defs[m.reactor]
            cparams = {}
            for p in cls.params:
                cparams[p.name] = coerce(p.type, p.default.value)
            for name, value in m.args:
                ptype = next(p.type for p in cls.params if p.name == name)
                raw = params[value.name] if isinstance(value, ast.ParamRef) else value.value
                cparams[name] = coerce(ptype, raw)
            children[m.name] = child_prefix + m.name
            self.instantiate(cls, child_prefix + m.name, cparams, fqn, depth + 1)

        def fq(ref: ast.PortRef) -> str:
            if len(ref.parts) == 1:
                name = ref.parts[0]
                if name in (STARTUP, SHUTDOWN):
                    return name
                return own + name
            return children[ref.parts[0]] + "." + ref.parts[1]

        for c in d.of(ast.ConnectionDecl):
            delay = self.time(c.delay, params) if c.delay is not None else None
            self.ig.declared.append(Declared(fq(c.src), fq(c.dst), delay, fqn, c.loc))

        for i, rx in enumerate(d.of(ast.ReactionDecl), start=1):
            local = {}
            for ref in rx.triggers + rx.sources + rx.effects:
                local[str(ref)] = fq(ref)
            self.ig.reactions.append(ReactionInstance(
                name=f"{fqn}.reaction{i}", owner=fqn, index=i,
                triggers=tuple(fq(t) for t in rx.triggers),
                sources=tuple(fq(s) for s in rx.sources),
                effects=tuple(fq(e) for e in rx.effects),
                local=local, body=rx.body,
                deadline=HandlerInstance(self.time(rx.deadline.bound, params), rx.deadline.body) if rx.deadline else None,
                stp=HandlerInstance(self.time(rx.stp.bound, params), rx.stp.body) if rx.stp else None,
                result_port=(own + rx.result_port) if rx.result_port else None,
                file=self.filename,
            ))

    # -- connections ------------------------------------------------------------

    def flatten(self) -> None:
        out_edges: dict[str, list[Declared]] = {}
        has_incoming = set()
        for d in self.ig.declared:
            out_edges.setdefault(d.src, []).append(d)
            has_incoming.add(d.dst)
        read = set()
        for r in self.ig.reactions:
            read.update(r.triggers)
            read.update(r.sources)
        stp_of: dict[str, int] = {}
        for r in self.ig.reactions:
            if r.stp is not None:
                for t in r.triggers + r.sources:
                    stp_of[t] = min(stp_of.get(t, r.stp.bound), r.stp.bound)

        result = set()
        visited = set()
        for root in sorted(out_edges):
            if root in has_incoming:
                continue
            visited.add(root)
            stack = [(root, None, (root,))]
            while stack:
                port, delay, path = stack.pop()
                for d in out_edges.get(port, []):
                    nd = _add_delay(delay, d.delay)
                    if d.dst in path:
                        self.error(d.loc, "connection cycle through " + " -> ".join(path + (d.dst,)))
                        continue
                    if d.dst in read or d.dst not in out_edges:
                        result.add(Connection(root, d.dst, nd, stp_of.get(d.dst)))
                    visited.add(d.dst)
                    stack.append((d.dst, nd, path + (d.dst,)))
        # a declared connection never reached from a root sits on a rootless loop
        for d in self.ig.declared:
            if d.src not in visited:
                self.error(d.loc, f"connection cycle through '{d.src}'")
                break
        self.ig.connections = sorted(result, key=lambda c: (c.src, c.dst))


def _zero(kind: str):
    return {"void": None, "bool": False, "int": 0, "float": 0.0, "string": "", "bytes": b""}[kind]


def elaborate(program: ast.Program, filename: str = "<input>") -> InstanceGraph:
    """Flatten ``program``; raises :class:`DiagnosticError` on elaboration errors."""
    return Elaborator(program, filename).run()
