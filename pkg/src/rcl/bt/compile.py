"""Compile ``behavior`` blocks into reactor definitions.

A behavior ``B`` becomes a container reactor ``B`` with ``input tick`` and
``output status: string``.  Every tree node becomes a child instance of the
container.  Composite nodes start their children one at a time through
``start_i`` outputs and react to the matching ``status_i`` inputs, all at
the same tag.  Leaves run their body when started; the body's return value
is sent on ``status``.  Data wires become plain delay-free connections.
"""

from __future__ import annotations

from ..dsl import ast
from ..errors import Diagnostic, DiagnosticError
from .model import COMPOSITES


def _ref(*parts: str, loc=None) -> ast.PortRef:
    return ast.PortRef(tuple(parts), loc)


def _script(text: str, loc=None) -> ast.Body:
    return ast.Body("script", text, loc)


def _composite_def(cls: str, node: ast.BtNodeDecl) -> ast.ReactorDef:
    n = len(node.children)
    loc = node.loc
    members: list = [
        ast.PortDecl("start", "input", "void", loc),
        ast.PortDecl("status", "output", "string", loc),
    ]
    for i in range(1, n + 1):
        members.append(ast.PortDecl(f"start_{i}", "output", "void", loc))
        members.append(ast.PortDecl(f"status_{i}", "input", "string", loc))
    keep_going = '"success"' if node.kind == "sequence" else '"failure"'
    if n == 0:
        members.append(ast.ReactionDecl((_ref("start"),), (), (_ref("status"),),
                                        _script(f" set(status, {keep_going}) "), loc=loc))
    else:
        members.append(ast.ReactionDecl((_ref("start"),), (), (_ref("start_1"),),
                                        _script(" set(start_1) "), loc=loc))
        for i in range(1, n + 1):
            if i < n:
                text = (f" if status_{i} == {keep_going} {{ set(start_{i + 1}) }}"
                        f" else {{ set(status, status_{i}) }} ")
                effects = (_ref(f"start_{i + 1}"), _ref("status"))
            else:
                text = f" set(status, status_{i}) "
                effects = (_ref("status"),)
            members.append(ast.ReactionDecl((_ref(f"status_{i}"),), (), effects, _script(text), loc=loc))
    return ast.ReactorDef(cls, "reactor", (), tuple(members), loc)


def _leaf_def(cls: str, node: ast.BtNodeDecl) -> ast.ReactorDef:
    loc = node.loc
    members: list = [
        ast.PortDecl("start", "input", "void", loc),
        ast.PortDecl("status", "output", "string", loc),
    ]
    sources, effects = [], [_ref("status")]
    for p in node.ports:
        if p.direction == "in":
            members.append(ast.PortDecl(p.name, "input", p.type, p.loc))
            sources.append(_ref(p.name, loc=p.loc))
        else:
            members.append(ast.PortDecl(p.name, "output", p.type, p.loc))
            effects.append(_ref(p.name, loc=p.loc))
    members.append(ast.ReactionDecl((_ref("start"),), tuple(sources), tuple(effects), node.body,
                                    result_port="status", loc=loc))
    return ast.ReactorDef(cls, "reactor", (), tuple(members), loc)


def compile_behavior(b: ast.BehaviorDef, filename: str = "<input>") -> list[ast.ReactorDef]:
    diags: list[Diagnostic] = []

    def error(loc, msg: str) -> None:
        line, col = (loc.line, loc.col) if loc is not None else (1, 1)
        diags.append(Diagnostic(line, col, msg, file=filename))

    if b.root is None:
        error(b.loc, f"behavior '{b.name}' has no root node")
        raise DiagnosticError(diags)

    nodes: list[ast.BtNodeDecl] = []

    def walk(n: ast.BtNodeDecl) -> None:
        nodes.append(n)
        for c in n.children:
            walk(c)

    walk(b.root)
    by_name: dict[str, ast.BtNodeDecl] = {}
    for n in nodes:
        if n.name in by_name:
            error(n.loc, f"duplicate node name '{n.name}' in behavior '{b.name}'")
        by_name[n.name] = n
        if n.name in ("tick", "status"):
            error(n.loc, f"'{n.name}' is reserved in a behavior")
        if n.kind not in COMPOSITES:
            seen = set()
            for p in n.ports:
                if p.name in seen or p.name in ("start", "status"):
                    error(p.loc, f"invalid or duplicate port '{p.name}' on '{n.name}'")
                seen.add(p.name)
                if n.kind == "condition" and p.direction == "out":
                    error(p.loc, f"condition '{n.name}' cannot declare out ports")

    leaves = [n for n in nodes if n.kind not in COMPOSITES]
    order = {n.name: i for i, n in enumerate(leaves)}
    writers: dict[tuple, ast.WireDecl] = {}
    for w in b.wires:
        if len(w.src.parts) != 2 or len(w.dst.parts) != 2:
            error(w.loc, "wires connect 'node.port' to 'node.port'")
            continue
        (sn, sp), (dn, dp) = w.src.parts, w.dst.parts
        src, dst = by_name.get(sn), by_name.get(dn)
        sport = next((p for p in src.ports if p.name == sp), None) if src is not None else None
        dport = next((p for p in dst.ports if p.name == dp), None) if dst is not None else None
        if sport is None or sport.direction != "out":
            error(w.src.loc or w.loc, f"unresolved out port '{w.src}'")
            continue
        if dport is None or dport.direction != "in":
            error(w.dst.loc or w.loc, f"unresolved in port '{w.dst}'")
            continue
        if sport.type != dport.type:
            error(w.loc, f"type mismatch on wire {w.src} -> {w.dst}: {sport.type} vs {dport.type}")
        if (dn, dp) in writers:
            error(w.loc, f"multiple writers to '{w.dst}'")
        writers[(dn, dp)] = w
        if order[sn] >= order[dn]:
            # leaves run in depth-first order within a tick, so this value
            # would be needed before it is produced
            error(w.loc, f"causality cycle: wire {w.src} -> {w.dst} feeds '{dn}', "
                         f"which is ticked before '{sn}' in the same tick")
    if diags:
        raise DiagnosticError(diags)

    defs = []
    members: list = [
        ast.PortDecl("tick", "input", "void", b.loc),
        ast.PortDecl("status", "output", "string", b.loc),
    ]
    for n in nodes:
        cls = f"{b.name}_{n.name}"
        defs.append(_composite_def(cls, n) if n.kind in COMPOSITES else _leaf_def(cls, n))
        members.append(ast.Instantiation(n.name, cls, (), n.loc))
    members.append(ast.ConnectionDecl(_ref("tick"), _ref(b.root.name, "start"), None, b.loc))
    members.append(ast.ConnectionDecl(_ref(b.root.name, "status"), _ref("status"), None, b.loc))
    for n in nodes:
        for i, c in enumerate(n.children, start=1):
            members.append(ast.ConnectionDecl(_ref(n.name, f"start_{i}"), _ref(c.name, "start"), None, c.loc))
            members.append(ast.ConnectionDecl(_ref(c.name, "status"), _ref(n.name, f"status_{i}"), None, c.loc))
    for w in b.wires:
        members.append(ast.ConnectionDecl(w.src, w.dst, None, w.loc))
    defs.append(ast.ReactorDef(b.name, "reactor", (), tuple(members), b.loc))
    return defs


def behaviors_to_reactors(behaviors, filename: str = "<input>") -> list[ast.ReactorDef]:
    out = []
    diags = []
    for b in behaviors:
        try:
            out += compile_behavior(b, filename)
        except DiagnosticError as e:
            diags += e.diagnostics
    if diags:
        raise DiagnosticError(diags)
    return out
