"""Centralized coordinator: tracks federate progress and grants tag advances.

A grant is an exclusive horizon: a federate holding grant ``g`` may process
any tag strictly less than ``g``.  Federates without upstream federates are
never constrained.
"""

from __future__ import annotations

from typing import Optional

from ..errors import ProtocolError
from ..tags import FOREVER, ZERO, Tag, tag_delay
from . import protocol


class Rti:
    def __init__(self, federates: list[str], upstream: dict[str, dict[str, int]]):
        self.federates = list(federates)
        self.upstream = {f: dict(upstream.get(f, {})) for f in self.federates}
        self.net: dict[str, Tag] = {f: ZERO for f in self.federates}
        self.ltc: dict[str, Optional[Tag]] = {f: None for f in self.federates}
        self.pending: dict[str, list[Tag]] = {f: [] for f in self.federates}
        self.grants: dict[str, Tag] = {f: ZERO for f in self.federates}
        self.history: dict[str, list[Tag]] = {f: [] for f in self.federates}

    def eot(self) -> dict[str, Tag]:
        """Earliest tag each federate might still send from, as a fixpoint."""
        est = {}
        for f in self.federates:
            est[f] = min([self.net[f]] + self.pending[f])
        for _ in range(len(self.federates) + 1):
            changed = False
            for f in self.federates:
                for u, d in self.upstream[f].items():
                    if est[u] == FOREVER:
                        continue
                    cand = tag_delay(est[u], d)
                    if cand < est[f]:
                        est[f] = cand
                        changed = True
            if not changed:
                break
        return est

    def grant_for(self, f: str, est: Optional[dict] = None) -> Tag:
        if not self.upstream[f]:
            return FOREVER
        est = est if est is not None else self.eot()
        out = FOREVER
        for u, d in self.upstream[f].items():
            if est[u] != FOREVER:
                out = min(out, tag_delay(est[u], d))
        return out

    def _grants(self) -> list[tuple[str, dict]]:
        est = self.eot()
        out = []
        for f in self.federates:
            g = self.grant_for(f, est)
            if g > self.grants[f]:
                self.grants[f] = g
                self.history[f].append(g)
                out.append((f, protocol.tagged("TAG", g)))
        return out

    def initial(self) -> list[tuple[str, dict]]:
        return self._grants()

    def handle(self, sender: str, m: dict) -> list[tuple[str, dict]]:
        """Process one message from ``sender``; return (destination, message) pairs."""
        kind = m["type"]
        if sender not in self.net:
            raise ProtocolError(f"message from unknown federate {sender!r}")
        out: list[tuple[str, dict]] = []
        if kind == "NET":
            t = protocol.tag_of(m)
            last = self.ltc[sender]
            if last is not None and t <= last:
                raise ProtocolError(f"{sender}: NET {t} not after its completed tag {last}")
            self.net[sender] = t
        elif kind == "LTC":
            t = protocol.tag_of(m)
            last = self.ltc[sender]
            if last is not None and t < last:
                raise ProtocolError(f"{sender}: LTC {t} goes backwards from {last}")
            self.ltc[sender] = t
            self.pending[sender] = [p for p in self.pending[sender] if p > t]
        elif kind == "MSG":
            dst = m.get("dst")
            if dst not in self.pending:
                raise ProtocolError(f"MSG for unknown federate {dst!r}")
            self.pending[dst].append(protocol.tag_of(m))
            out.append((dst, m))
        elif kind in ("HELLO", "FAULT"):
            pass
        else:
            raise ProtocolError(f"unexpected {kind} from {sender}")
        return out + self._grants()
