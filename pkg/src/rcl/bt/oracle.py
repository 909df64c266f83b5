"""Reference tick semantics for memoryless behavior trees.

Sequence ticks children left to right and returns the first status other
than success (success if none).  Fallback returns the first status other
than failure (failure if none).  Values written by a leaf's out ports flow
along wires to later leaves of the same tick.
"""

from __future__ import annotations

from typing import Callable

from .model import FAILURE, STATUSES, SUCCESS, BtNode, Wire


class UndefinedOutcome(KeyError):
    pass


LeafFn = Callable[[BtNode, dict], tuple]  # (leaf, inputs) -> (status, outputs)


def tick(root: BtNode, leaf_fn: LeafFn, wires: list[Wire] = ()) -> tuple[str, list[str], dict]:
    """Return (root status, activated leaf names, out-port values by 'leaf.port')."""
    feeds: dict[tuple, tuple] = {w.dst: w.src for w in wires}
    values: dict[tuple, object] = {}
    activated: list[str] = []

    def run(n: BtNode) -> str:
        if n.is_leaf:
            activated.append(n.name)
            inputs = {}
            for p, _ in n.ins:
                src = feeds.get((n.name, p))
                if src is not None and src in values:
                    inputs[p] = values[src]
            status, outputs = leaf_fn(n, inputs)
            if status not in STATUSES:
                raise ValueError(f"leaf {n.name} returned {status!r}")
            for p, v in outputs.items():
                values[(n.name, p)] = v
            return status
        keep_going = SUCCESS if n.kind == "sequence" else FAILURE
        for c in n.children:
            s = run(c)
            if s != keep_going:
                return s
        return keep_going

    status = run(root)
    return status, activated, {f"{k[0]}.{k[1]}": v for k, v in sorted(values.items())}


def scripted(outcomes: dict[str, str], value_fn: Callable[[BtNode, dict], dict] | None = None) -> LeafFn:
    """Leaf function driven by an outcome map; unassigned leaves raise."""

    def fn(leaf: BtNode, inputs: dict):
        if leaf.name not in outcomes:
            raise UndefinedOutcome(leaf.name)
        outs = value_fn(leaf, inputs) if value_fn else {}
        return outcomes[leaf.name], outs
    return fn
