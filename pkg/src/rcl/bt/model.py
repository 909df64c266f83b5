"""Behavior-tree nodes, independent of the DSL syntax tree."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..dsl import ast
from ..dsl.lexer import quote

SUCCESS = "success"
FAILURE = "failure"
RUNNING = "running"
STATUSES = (SUCCESS, FAILURE, RUNNING)
COMPOSITES = ("sequence", "fallback")
LEAVES = ("action", "condition")


@dataclass(frozen=True)
class BtNode:
    kind: str
    name: str
    children: tuple = ()
    ins: tuple = ()  # (name, type) pairs
    outs: tuple = ()
    body: Optional[ast.Body] = None

    @property
    def is_leaf(self) -> bool:
        return self.kind in LEAVES

    def leaves(self) -> list["BtNode"]:
        if self.is_leaf:
            return [self]
        out = []
        for c in self.children:
            out += c.leaves()
        return out

    def nodes(self) -> list["BtNode"]:
        out = [self]
        for c in self.children:
            out += c.nodes()
        return out

    def depth(self) -> int:
        return 1 + max((c.depth() for c in self.children), default=0)


@dataclass(frozen=True)
class Wire:
    src: tuple  # (node, port)
    dst: tuple


def from_ast(decl: ast.BtNodeDecl) -> BtNode:
    ins = tuple((p.name, p.type) for p in decl.ports if p.direction == "in")
    outs = tuple((p.name, p.type) for p in decl.ports if p.direction == "out")
    return BtNode(decl.kind, decl.name, tuple(from_ast(c) for c in decl.children), ins, outs, decl.body)


def wires_from_ast(b: ast.BehaviorDef) -> list[Wire]:
    out = []
    for w in b.wires:
        out.append(Wire(tuple(w.src.parts), tuple(w.dst.parts)))
    return out


def to_source(name: str, root: Optional[BtNode], wires: list[Wire]) -> str:
    """Render a tree as a ``behavior`` block."""
    lines = [f"behavior {name} {{"]

    def emit(n: BtNode, indent: str) -> None:
        if not n.is_leaf:
            lines.append(f"{indent}{n.kind} {n.name} {{")
            for c in n.children:
                emit(c, indent + "  ")
            lines.append(f"{indent}}}")
            return
        ports = [f"in {p}: {t}" for p, t in n.ins] + [f"out {p}: {t}" for p, t in n.outs]
        body = n.body or ast.Body("extern", f"leaf:{n.name}")
        text = f"extern {quote(body.text)}" if body.kind == "extern" else "{=" + body.text + "=}"
        lines.append(f"{indent}{n.kind} {n.name}({', '.join(ports)}) = {text}")

    if root is not None:
        emit(root, "  ")
    for w in wires:
        lines.append(f"  wire {'.'.join(w.src)} -> {'.'.join(w.dst)}")
    lines.append("}")
    return "\n".join(lines) + "\n"
