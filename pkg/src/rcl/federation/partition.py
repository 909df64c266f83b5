"""Split a federated instance graph into federates."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..model import Connection, InstanceGraph


@dataclass(frozen=True)
class FederateId:
    index: int
    name: str


@dataclass
class FederatePlan:
    id: FederateId
    reactors: list = field(default_factory=list)
    reactions: list = field(default_factory=list)
    inbound: list = field(default_factory=list)  # cross connections into this federate
    outbound: list = field(default_factory=list)

    @property
    def stp_wait(self) -> int:
        """Largest STP offset over inbound connections (0 without any)."""
        return max((c.stp or 0 for c in self.inbound), default=0)


def partition(ig: InstanceGraph) -> list[tuple[FederateId, FederatePlan, list[Connection]]]:
    names = ig.federates or [n for n in ig.reactors if n != "main" and "." not in n]
    plans = {}
    for i, name in enumerate(names):
        plans[name] = FederatePlan(FederateId(i, name))
    for fqn in sorted(ig.reactors):
        f = fqn.split(".", 1)[0]
        if f in plans:
            plans[f].reactors.append(fqn)
    for r in ig.reactions:
        f = r.owner.split(".", 1)[0]
        if f in plans:
            plans[f].reactions.append(r.name)
    cross = []
    for c in ig.connections:
        a, b = c.src.split(".", 1)[0], c.dst.split(".", 1)[0]
        if a != b and a in plans and b in plans:
            cross.append(c)
            plans[a].outbound.append(c)
            plans[b].inbound.append(c)
    return [(p.id, p, [c for c in cross if p.id.name in (c.src.split(".", 1)[0], c.dst.split(".", 1)[0])])
            for p in plans.values()]


def upstream_delays(ig: InstanceGraph) -> dict[str, dict[str, int]]:
    """For each federate, its upstream federates and the minimum connection delay."""
    out: dict[str, dict[str, int]] = {f: {} for f in ig.federates}
    for c in ig.connections:
        a, b = ig.federate_of(c.src), ig.federate_of(c.dst)
        if a is None or b is None or a == b:
            continue
        d = c.delay or 0
        out[b][a] = min(out[b].get(a, d), d)
    return out
