"""Pretty-printer producing source that re-parses to an equal tree."""

from __future__ import annotations

from ..tags import format_time
from . import ast
from .lexer import quote


def _time(t: ast.TimeExpr) -> str:
    return t.param if t.param is not None else format_time(t.ns)


def _literal(lit) -> str:
    if isinstance(lit, ast.ParamRef):
        return lit.name
    v = lit.value
    if lit.is_time:
        return ("-" + format_time(-v)) if v < 0 else format_time(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    return quote(v)


def _body(b: ast.Body) -> str:
    if b.kind == "extern":
        return f"extern {quote(b.text)}"
    return "{=" + b.text + "=}"


def _refs(refs) -> str:
    return ", ".join(str(r) for r in refs)


def format_member(m: ast.Member) -> str:
    if isinstance(m, ast.PortDecl):
        return f"{m.direction} {m.name}: {m.type}"
    if isinstance(m, ast.TimerDecl):
        return f"timer {m.name}({_time(m.offset)}, {_time(m.period)})"
    if isinstance(m, ast.ActionDecl):
        delay = f"({_time(m.min_delay)})" if m.min_delay is not None else ""
        return f"{m.origin} action {m.name}{delay}: {m.type}"
    if isinstance(m, ast.StateDecl):
        init = f" = {_literal(m.init)}" if m.init is not None else ""
        return f"state {m.name}: {m.type}{init}"
    if isinstance(m, ast.Instantiation):
        args = ", ".join(f"{k} = {_literal(v)}" for k, v in m.args)
        return f"{m.name} = new {m.reactor}({args})"
    if isinstance(m, ast.ConnectionDecl):
        after = f" after {_time(m.delay)}" if m.delay is not None else ""
        return f"{m.src} -> {m.dst}{after}"
    if isinstance(m, ast.ReactionDecl):
        head = f"reaction({_refs(m.triggers)})"
        if m.sources:
            head += " " + _refs(m.sources)
        if m.effects:
            head += " -> " + _refs(m.effects)
        text = f"{head} {_body(m.body)}"
        if m.stp is not None:
            text += f" stp({_time(m.stp.bound)}) {_body(m.stp.body)}"
        if m.deadline is not None:
            text += f" deadline({_time(m.deadline.bound)}) {_body(m.deadline.body)}"
        return text
    raise TypeError(f"cannot print {m!r}")


def format_reactor(r: ast.ReactorDef) -> str:
    prefix = "" if r.kind == "reactor" else r.kind + " "
    name = f" {r.name}" if r.name else ""
    params = ""
    if r.params:
        params = "(" + ", ".join(f"{p.name}: {p.type} = {_literal(p.default)}" for p in r.params) + ")"
    lines = [f"{prefix}reactor{name}{params} {{"]
    lines += [f"  {format_member(m)}" for m in r.members]
    lines.append("}")
    return "\n".join(lines)


def _bt_node(n: ast.BtNodeDecl, indent: str) -> list[str]:
    if n.kind in ("sequence", "fallback"):
        out = [f"{indent}{n.kind} {n.name} {{"]
        for c in n.children:
            out += _bt_node(c, indent + "  ")
        out.append(f"{indent}}}")
        return out
    ports = ", ".join(f"{p.direction} {p.name}: {p.type}" for p in n.ports)
    return [f"{indent}{n.kind} {n.name}({ports}) = {_body(n.body)}"]


def format_behavior(b: ast.BehaviorDef) -> str:
    lines = [f"behavior {b.name} {{"]
    if b.root is not None:
        lines += _bt_node(b.root, "  ")
    lines += [f"  wire {w.src} -> {w.dst}" for w in b.wires]
    lines.append("}")
    return "\n".join(lines)


def format_program(p: ast.Program) -> str:
    chunks = []
    if p.target is not None:
        chunks.append(f"target {p.target}")
    chunks += [format_reactor(r) for r in p.reactors]
    chunks += [format_behavior(b) for b in p.behaviors]
    return "\n\n".join(chunks) + "\n"
