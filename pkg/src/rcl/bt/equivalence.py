"""Compare compiled behavior trees against the reference tick.

One engine run covers many ticks: tick ``k`` happens at tag ``(k ms, 0)``
and uses the ``k``-th outcome assignment.  Leaves are extern callbacks
that look up their outcome; activating a leaf without an outcome is a
runtime fault, so a passing run also proves that no other leaf ran.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

from ..compiler import compile_source
from ..runtime.engine import Engine, RunConfig
from ..tags import MSEC
from ..values import ABSENT
from . import oracle
from .model import FAILURE, RUNNING, STATUSES, SUCCESS, BtNode, Wire, to_source

BEHAVIOR = "Tree"
INSTANCE = "bt"


@dataclass
class Counterexample:
    tick: int
    outcomes: dict
    expected: tuple
    actual: tuple

    def __str__(self) -> str:
        return (f"tick {self.tick} with outcomes {self.outcomes}: "
                f"oracle {self.expected}, compiled {self.actual}")


def default_values(leaf: BtNode, inputs: dict) -> dict:
    """Deterministic out-port values derived from the inputs."""
    base = sum(v for v in inputs.values() if isinstance(v, int))
    return {p: base * 3 + len(leaf.name) + i for i, (p, _) in enumerate(leaf.outs)}


def harness_source(root: BtNode, wires: list[Wire]) -> str:
    return to_source(BEHAVIOR, root, wires) + f"""
main reactor {{
  timer t(0, 1 ms)
  {INSTANCE} = new {BEHAVIOR}()
  reaction(t) -> {INSTANCE}.tick {{= set({INSTANCE}.tick) =}}
  reaction({INSTANCE}.status) {{= =}}
}}
"""


def run_compiled(root: BtNode, wires: list[Wire], assignments: list[dict],
                 value_fn: Callable = default_values, workers: int = 1):
    """Run one tick per assignment; return per-tick (status, activated, ports) or an error."""
    program = compile_source(harness_source(root, wires), "<behavior>")
    leaves = {leaf.name: leaf for leaf in root.leaves()}
    externs = {}
    for name, leaf in leaves.items():
        def cb(ctx, leaf=leaf):
            k = ctx.tag.time // MSEC
            outcome = assignments[k][leaf.name]  # KeyError: activated without an outcome
            inputs = {}
            for p, _ in leaf.ins:
                v = ctx.read(p)
                if v is not ABSENT:
                    inputs[p] = v
            for p, v in value_fn(leaf, inputs).items():
                ctx.set(p, v)
            return outcome
        externs[f"leaf:{name}"] = cb
    cfg = RunConfig(timeout=(len(assignments) - 1) * MSEC, workers=workers)
    result = Engine(program, cfg, externs).run()
    ticks = [[None, [], {}] for _ in assignments]
    prefix = INSTANCE + "."
    for rec in result.trace.records:
        if rec.kind != "reaction":
            continue
        k = rec.tag.time // MSEC
        if rec.subject == "main.reaction2":
            ticks[k][0] = rec.inputs[f"{INSTANCE}.status"]
            continue
        owner = rec.subject.rsplit(".", 1)[0]
        node = owner[len(prefix):] if owner.startswith(prefix) else None
        if node in leaves:
            ticks[k][1].append(node)
            for port, v in rec.outputs.items():
                short = port[len(prefix):]
                if not short.endswith(".status"):
                    ticks[k][2][short] = v
    return [tuple(t) for t in ticks], result.error


def decision_paths(root: BtNode) -> Iterator[dict]:
    """Every distinct partial outcome assignment the tick can observe.

    Each path assigns outcomes only to the leaves actually activated, so
    together they cover every full assignment.
    """
    def go(assigned: dict) -> Iterator[dict]:
        fn = oracle.scripted(assigned)
        try:
            oracle.tick(root, fn)
        except oracle.UndefinedOutcome as e:
            leaf = e.args[0]
            for s in STATUSES:
                yield from go({**assigned, leaf: s})
            return
        yield assigned
    yield from go({})


def full_assignments(root: BtNode) -> Iterator[dict]:
    names = [leaf.name for leaf in root.leaves()]
    for combo in itertools.product(STATUSES, repeat=len(names)):
        yield dict(zip(names, combo))


def check(root: BtNode, wires: list[Wire], assignments: list[dict],
          value_fn: Callable = default_values, workers: int = 1) -> Optional[Counterexample]:
    if not assignments:
        return None
    got, error = run_compiled(root, wires, assignments, value_fn, workers)
    for k, outcomes in enumerate(assignments):
        try:
            expected = oracle.tick(root, oracle.scripted(outcomes, value_fn), wires)
        except oracle.UndefinedOutcome:
            expected = ("undefined",)
        if error is not None and got[k][0] is None:
            return Counterexample(k, outcomes, expected, ("error", error))
        if tuple(expected) != got[k]:
            return Counterexample(k, outcomes, tuple(expected), got[k])
    return None


# -- tree enumeration ------------------------------------------------------------

def enumerate_trees(max_depth: int, max_children: int = 3) -> Iterator[BtNode]:
    """All shapes up to ``max_depth`` (a lone leaf has depth 1), unnamed."""
    if max_depth < 1:
        return
    yield BtNode("action", "")
    if max_depth == 1:
        return
    subtrees = list(enumerate_trees(max_depth - 1, max_children))
    for kind in ("sequence", "fallback"):
        for k in range(max_children + 1):
            for kids in itertools.product(subtrees, repeat=k):
                yield BtNode(kind, "", tuple(kids))


def chain_wired(shape: BtNode) -> tuple[BtNode, list[Wire]]:
    """Name nodes and chain an int port from each leaf to the next (DFS order)."""
    counters = {"leaf": 0, "node": 0}

    def name(n: BtNode) -> BtNode:
        if n.is_leaf:
            counters["leaf"] += 1
            i = counters["leaf"]
            return BtNode("action", f"L{i}", (), (("x", "int"),), (("y", "int"),))
        counters["node"] += 1
        label = f"{'S' if n.kind == 'sequence' else 'F'}{counters['node']}"
        return BtNode(n.kind, label, tuple(name(c) for c in n.children))

    root = name(shape)
    leaves = root.leaves()
    wires = [Wire((a.name, "y"), (b.name, "x")) for a, b in zip(leaves, leaves[1:])]
    return root, wires


__all__ = ["SUCCESS", "FAILURE", "RUNNING", "check", "decision_paths", "enumerate_trees", "chain_wired",
           "full_assignments", "run_compiled", "Counterexample"]
