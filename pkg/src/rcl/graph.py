"""Reaction dependency graph, causality cycles and level assignment."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import CausalityCycleError, Diagnostic
from .model import InstanceGraph
from .tags import format_time

MAX_CYCLES = 100


@dataclass
class ReactionGraph:
    nodes: list = field(default_factory=list)  # sorted reaction names
    edges: set = field(default_factory=set)  # (u, v) pairs
    # edges that would exist without after-delays, kept only for rendering
    delayed: dict = field(default_factory=dict)  # (u, v) -> delay ns
    deadlines: dict = field(default_factory=dict)

    def successors(self) -> dict:
        succ = {n: [] for n in self.nodes}
        for u, v in sorted(self.edges):
            succ[u].append(v)
        return succ


def build_graph(ig: InstanceGraph) -> ReactionGraph:
    g = ReactionGraph(nodes=sorted(r.name for r in ig.reactions))
    g.deadlines = {r.name: r.deadline_ns for r in ig.reactions}
    writers: dict[str, list[str]] = {}
    readers: dict[str, list[str]] = {}
    by_owner: dict[str, list] = {}
    for r in ig.reactions:
        for e in r.effects:
            writers.setdefault(e, []).append(r.name)
        for t in r.triggers + r.sources:
            readers.setdefault(t, []).append(r.name)
        by_owner.setdefault(r.owner, []).append(r)
    for rs in by_owner.values():
        rs.sort(key=lambda r: r.index)
        for a, b in zip(rs, rs[1:]):
            g.edges.add((a.name, b.name))
    # reactions writing a port read directly by another reaction (parent/child access)
    for port, ws in writers.items():
        if port in ig.actions:
            continue
        for w in ws:
            for rd in readers.get(port, []):
                if w != rd:
                    g.edges.add((w, rd))
    for c in ig.connections:
        for w in writers.get(c.src, []):
            for rd in readers.get(c.dst, []):
                if c.delay is None:
                    g.edges.add((w, rd))
                else:
                    g.delayed[(w, rd)] = c.delay
    return g


def _sccs(nodes: list, succ: dict) -> list[list]:
    """Tarjan's algorithm, iterative."""
    index: dict = {}
    low: dict = {}
    on_stack = set()
    stack: list = []
    out = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter
                    counter += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(succ[nxt])))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                out.append(sorted(comp))
    return out


def detect_cycles(g: ReactionGraph, limit: int = MAX_CYCLES) -> list[list[str]]:
    """Elementary cycles, each rotated to start at its smallest name.

    Cycles are enumerated per strongly connected component by a DFS that only
    visits nodes larger than the start node, so each cycle appears once.
    """
    succ = g.successors()
    cycles: list[list[str]] = []
    for comp in _sccs(g.nodes, succ):
        members = set(comp)
        if len(comp) == 1 and (comp[0], comp[0]) not in g.edges:
            continue
        for start in comp:
            path = [start]
            on_path = {start}
            stack = [iter(sorted(v for v in succ[start] if v in members and v >= start))]
            while stack:
                nxt = next(stack[-1], None)
                if nxt is None:
                    stack.pop()
                    on_path.discard(path.pop())
                    continue
                if nxt == start:
                    cycles.append(list(path))
                    if len(cycles) >= limit:
                        return sorted(cycles)
                elif nxt not in on_path:
                    path.append(nxt)
                    on_path.add(nxt)
                    stack.append(iter(sorted(v for v in succ[nxt] if v in members and v >= start)))
    return sorted(cycles)


def assign_levels(g: ReactionGraph) -> dict[str, int]:
    """Longest-path levels by Kahn's algorithm; rejects cyclic graphs."""
    succ = g.successors()
    indeg = {n: 0 for n in g.nodes}
    for _, v in g.edges:
        indeg[v] += 1
    level = {n: 0 for n in g.nodes}
    ready = deque(n for n in g.nodes if indeg[n] == 0)
    seen = 0
    while ready:
        u = ready.popleft()
        seen += 1
        for v in succ[u]:
            level[v] = max(level[v], level[u] + 1)
            indeg[v] -= 1
            if indeg[v] == 0:
                ready.append(v)
    if seen != len(g.nodes):
        cycles = detect_cycles(g)
        raise CausalityCycleError(cycles, [_cycle_diag(c) for c in cycles])
    return level


def _cycle_diag(cycle: list[str], file: str = "<input>") -> Diagnostic:
    return Diagnostic(1, 1, "causality cycle: " + " -> ".join(cycle + cycle[:1]), file=file)


def cycle_diagnostics(cycles: list[list[str]], ig: Optional[InstanceGraph] = None, file: str = "<input>") -> list[Diagnostic]:
    out = []
    for c in cycles:
        line = col = 1
        if ig is not None:
            r = ig.reaction(c[0])
            if r.body.loc is not None:
                line, col = r.body.loc.line, r.body.loc.col
        out.append(Diagnostic(line, col, "causality cycle: " + " -> ".join(c + c[:1]), file=file))
    return out


def dispatch_key(name: str, deadline: Optional[int]) -> tuple:
    """Within a level: nearer deadline first, then name."""
    return (deadline if deadline is not None else float("inf"), name)


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(g: ReactionGraph, levels: dict[str, int], title: str = "reactions") -> str:
    lines = [f"digraph {_quote(title)} {{", "  rankdir=LR;", "  node [shape=box];"]
    for n in g.nodes:
        d = g.deadlines.get(n)
        dl = format_time(d) if d is not None else "none"
        lines.append(f"  {_quote(n)} [label={_quote(f'{n} (level={levels.get(n, 0)}, deadline={dl})')}];")
    for u, v in sorted(g.edges):
        lines.append(f"  {_quote(u)} -> {_quote(v)};")
    for (u, v), delay in sorted(g.delayed.items()):
        lines.append(f"  {_quote(u)} -> {_quote(v)} [style=dashed, label={_quote(format_time(delay))}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def edges_respected(g: ReactionGraph, levels: dict[str, int], edges: Iterable | None = None) -> bool:
    return all(levels[u] < levels[v] for u, v in (edges if edges is not None else g.edges))
