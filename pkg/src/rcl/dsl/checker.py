"""Name resolution and static checks over a parsed program."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..errors import Diagnostic, DiagnosticError, ParseError
from ..model import SHUTDOWN, STARTUP
from ..values import coerce
from . import ast
from .script import Scope, check_script, parse_script


@dataclass(frozen=True)
class Resolved:
    kind: str  # startup|shutdown|timer|action|input|output|child_input|child_output
    decl: object = None
    child: Optional[str] = None


class Checker:
    def __init__(self, program: ast.Program, filename: str = "<input>"):
        self.program = program
        self.filename = filename
        self.diags: list[Diagnostic] = []
        self.defs: dict[str, ast.ReactorDef] = {}

    def error(self, loc, message: str) -> None:
        line, col = (loc.line, loc.col) if loc is not None else (1, 1)
        self.diags.append(Diagnostic(line, col, message, file=self.filename))

    # -- entry ----------------------------------------------------------------

    def run(self) -> list[Diagnostic]:
        mains = []
        for r in self.program.reactors:
            if r.is_main:
                mains.append(r)
                continue
            if r.name in self.defs:
                self.error(r.loc, f"duplicate definition of reactor '{r.name}'")
            else:
                self.defs[r.name] = r
        if not mains:
            self.error(None, "no main or federated reactor")
        for extra in mains[1:]:
            self.error(extra.loc, "more than one main reactor")
        for r in self.program.reactors:
            self.check_reactor(r)
        self.check_instantiation_cycles()
        return self.diags

    # -- per reactor ------------------------------------------------------------

    def members(self, r: ast.ReactorDef) -> dict[str, object]:
        out: dict[str, object] = {}
        for p in r.params:
            out[p.name] = p
        for m in r.members:
            name = getattr(m, "name", None)
            if name is not None:
                out[name] = m
        return out

    def check_reactor(self, r: ast.ReactorDef) -> None:
        seen: dict[str, object] = {}
        for item in list(r.params) + [m for m in r.members if hasattr(m, "name")]:
            if item.name in seen:
                self.error(item.loc, f"duplicate definition of '{item.name}' in reactor '{r.name or 'main'}'")
            elif item.name in (STARTUP, SHUTDOWN):
                self.error(item.loc, f"'{item.name}' is reserved")
            else:
                seen[item.name] = item
        params = {p.name: p for p in r.params}
        for p in r.params:
            self.check_literal_type(p.default, p.type, p.loc, f"parameter '{p.name}'")
        if r.kind == "federated":
            for m in r.members:
                if not isinstance(m, (ast.Instantiation, ast.ConnectionDecl)):
                    self.error(m.loc, "a federated reactor may only contain instances and connections")
        if r.is_main:
            for m in r.of(ast.PortDecl):
                self.error(m.loc, "the main reactor cannot declare ports")
            for m in r.of(ast.Instantiation):
                if m.name == "main":
                    self.error(m.loc, "'main' is reserved as an instance name")
        for m in r.members:
            if isinstance(m, ast.TimerDecl):
                self.check_time(m.offset, params, "timer offset", allow_zero=True)
                self.check_time(m.period, params, "timer period", allow_zero=True)
            elif isinstance(m, ast.ActionDecl):
                if m.min_delay is not None:
                    self.check_time(m.min_delay, params, "action delay", allow_zero=True)
            elif isinstance(m, ast.StateDecl):
                if m.init is not None:
                    self.check_literal_type(m.init, m.type, m.loc, f"state '{m.name}'")
            elif isinstance(m, ast.Instantiation):
                self.check_instantiation(m, params)
        self.check_connections(r, params)
        for i, rx in enumerate(r.of(ast.ReactionDecl), start=1):
            self.check_reaction(r, rx, params)

    def check_literal_type(self, lit, typ: str, loc, what: str) -> None:
        if isinstance(lit, ast.ParamRef):
            return
        try:
            coerce(typ, lit.value)
        except Exception:
            self.error(lit.loc or loc, f"{what}: value {lit.value!r} does not match type {typ}")

    def check_time(self, t: ast.TimeExpr, params: dict, what: str, allow_zero: bool) -> None:
        if t.param is not None:
            p = params.get(t.param)
            if p is None:
                self.error(t.loc, f"unresolved parameter '{t.param}' in {what}")
            elif p.type != "int":
                self.error(t.loc, f"parameter '{t.param}' used as {what} must be a time or int")
            return
        if t.ns < 0 or (t.ns == 0 and not allow_zero):
            self.error(t.loc, f"{what} must be positive")

    def check_instantiation(self, m: ast.Instantiation, params: dict) -> None:
        cls = self.defs.get(m.reactor)
        if cls is None:
            self.error(m.loc, f"unresolved reactor class '{m.reactor}'")
            return
        declared = {p.name: p for p in cls.params}
        seen = set()
        for name, value in m.args:
            if name in seen:
                self.error(m.loc, f"duplicate argument '{name}'")
            seen.add(name)
            p = declared.get(name)
            if p is None:
                self.error(m.loc, f"reactor '{m.reactor}' has no parameter '{name}'")
                continue
            if isinstance(value, ast.ParamRef):
                outer = params.get(value.name)
                if outer is None:
                    self.error(value.loc or m.loc, f"unresolved parameter '{value.name}'")
                elif outer.type != p.type and not (p.type == "float" and outer.type == "int"):
                    self.error(value.loc or m.loc, f"parameter '{value.name}' has type {outer.type}, expected {p.type}")
            else:
                self.check_literal_type(value, p.type, m.loc, f"argument '{name}'")

    # -- resolution -------------------------------------------------------------

    def resolve(self, r: ast.ReactorDef, ref: ast.PortRef) -> Optional[Resolved]:
        parts = ref.parts
        if len(parts) == 1:
            name = parts[0]
            if name in (STARTUP, SHUTDOWN):
                return Resolved(name)
            m = self.members(r).get(name)
            if isinstance(m, ast.TimerDecl):
                return Resolved("timer", m)
            if isinstance(m, ast.ActionDecl):
                return Resolved("action", m)
            if isinstance(m, ast.PortDecl):
                return Resolved(m.direction, m)
            return None
        if len(parts) == 2:
            inst = self.members(r).get(parts[0])
            if not isinstance(inst, ast.Instantiation):
                return None
            cls = self.defs.get(inst.reactor)
            if cls is None:
                return None
            m = self.members(cls).get(parts[1])
            if isinstance(m, ast.PortDecl):
                return Resolved("child_" + m.direction, m, inst.name)
        return None

    def check_connections(self, r: ast.ReactorDef, params: dict) -> None:
        writers: dict[str, ast.ConnectionDecl] = {}
        for c in r.of(ast.ConnectionDecl):
            if c.delay is not None:
                self.check_time(c.delay, params, "connection delay", allow_zero=True)
            src = self.resolve(r, c.src)
            dst = self.resolve(r, c.dst)
            if src is None:
                self.error(c.src.loc, f"unresolved port '{c.src}'")
            elif src.kind not in ("input", "child_output"):
                self.error(c.src.loc, f"direction violation: '{c.src}' cannot be a connection source")
            if dst is None:
                self.error(c.dst.loc, f"unresolved port '{c.dst}'")
            elif dst.kind not in ("output", "child_input"):
                self.error(c.dst.loc, f"direction violation: '{c.dst}' cannot be a connection destination")
            if src is not None and dst is not None and src.decl is not None and dst.decl is not None:
                if getattr(src.decl, "type", None) != getattr(dst.decl, "type", None):
                    self.error(c.loc, f"type mismatch: '{c.src}' is {src.decl.type} but '{c.dst}' is {dst.decl.type}")
            key = str(c.dst)
            if key in writers:
                self.error(c.dst.loc, f"multiple writers to '{key}'")
            writers[key] = c
        for rx in r.of(ast.ReactionDecl):
            for e in rx.effects:
                if str(e) in writers:
                    self.error(e.loc, f"multiple writers to '{e}': a connection and a reaction")

    def check_reaction(self, r: ast.ReactorDef, rx: ast.ReactionDecl, params: dict) -> None:
        if not rx.triggers:
            self.error(rx.loc, "a reaction needs at least one trigger")
        readable, ports, actions = set(), set(), set()
        for t in rx.triggers:
            res = self.resolve(r, t)
            if res is None:
                self.error(t.loc, f"unresolved trigger '{t}'")
            elif res.kind in ("output", "child_input"):
                self.error(t.loc, f"direction violation: cannot trigger on '{t}'")
            else:
                readable.add(str(t))
        for s in rx.sources:
            res = self.resolve(r, s)
            if res is None:
                self.error(s.loc, f"unresolved source '{s}'")
            elif res.kind not in ("input", "child_output"):
                self.error(s.loc, f"'{s}' cannot be read as a source")
            else:
                readable.add(str(s))
        for e in rx.effects:
            res = self.resolve(r, e)
            if res is None:
                self.error(e.loc, f"unresolved effect '{e}'")
            elif res.kind in ("input", "child_output"):
                self.error(e.loc, f"direction violation: cannot write '{e}'")
            elif res.kind == "action":
                actions.add(str(e))
            elif res.kind in ("output", "child_input"):
                ports.add(str(e))
                if str(e) in readable:
                    self.error(e.loc, f"reaction both reads and writes '{e}'")
            else:
                self.error(e.loc, f"'{e}' cannot be an effect")
        for h, what in ((rx.deadline, "deadline"), (rx.stp, "stp")):
            if h is not None:
                self.check_time(h.bound, params, f"{what} bound", allow_zero=False)
        state = {m.name for m in r.of(ast.StateDecl)}
        scope = Scope(readable, ports, actions, state, set(params))
        for body in [rx.body] + [h.body for h in (rx.deadline, rx.stp) if h is not None]:
            if body.kind != "script":
                continue
            line, col = (body.loc.line, body.loc.col) if body.loc else (1, 1)
            try:
                script = parse_script(body.text, self.filename, line, col)
            except ParseError as e:
                self.diags.extend(e.diagnostics)
                continue
            self.diags.extend(check_script(script, scope, self.filename))

    def check_instantiation_cycles(self) -> None:
        graph = {name: [m.reactor for m in d.of(ast.Instantiation) if m.reactor in self.defs]
                 for name, d in self.defs.items()}
        state: dict[str, int] = {}
        reported = set()

        def visit(n: str, path: list[str]) -> None:
            state[n] = 1
            for m in graph[n]:
                if state.get(m) == 1:
                    cycle = path[path.index(m):] + [m] if m in path else [n, m]
                    key = frozenset(cycle)
                    if key not in reported:
                        reported.add(key)
                        self.error(self.defs[m].loc, "instantiation cycle: " + " -> ".join(cycle))
                elif state.get(m) is None:
                    visit(m, path + [m])
            state[n] = 2

        for name in sorted(graph):
            if name not in state:
                visit(name, [name])


def validate(program: ast.Program, filename: str = "<input>") -> list[Diagnostic]:
    """Return diagnostics for ``program``; an empty list means it is well formed."""
    return Checker(program, filename).run()


def validate_or_raise(program: ast.Program, filename: str = "<input>") -> None:
    diags = validate(program, filename)
    if diags:
        raise DiagnosticError(diags)
