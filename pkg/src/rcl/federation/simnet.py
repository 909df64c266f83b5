"""Deterministic in-process federation over a simulated network.

All federates share one virtual clock.  Links are FIFO: a message never
overtakes an earlier one on the same link.  At each clock instant, network
arrivals are handled before any federate advances.
"""

from __future__ import annotations

import heapq
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from ..compiler import CompiledProgram
from ..errors import FederationError, RclError, TagInPastError
from ..model import Connection
from ..runtime.clock import VirtualClock
from ..runtime.engine import Engine, RunConfig, ScriptEntry
from ..tags import FOREVER, MSEC, Tag, format_time, tag_delay
from ..trace import Trace, TraceRecord, canonicalize, dedupe_markers, make_header
from . import protocol
from .partition import partition, upstream_delays
from .rti import Rti

RTI = "rti"


class LatencyScript:
    """Per-connection latencies applied message by message; the last entry repeats."""

    def __init__(self, entries: Optional[list[tuple[str, int]]] = None):
        self.by_conn: dict[str, list[int]] = {}
        self.default: list[int] = []
        for conn, ns in entries or []:
            if conn == "*":
                self.default.append(ns)
            else:
                self.by_conn.setdefault(conn, []).append(ns)
        self.used: dict[str, int] = {}

    @classmethod
    def parse(cls, text: str) -> "LatencyScript":
        entries = []
        for n, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                ms = obj["delay_ms"]
                if isinstance(ms, bool) or not isinstance(ms, (int, float)) or ms < 0:
                    raise ValueError(f"bad delay_ms {ms!r}")
                entries.append((str(obj["connection"]), round(ms * MSEC)))
            except (KeyError, ValueError, TypeError) as e:
                raise ValueError(f"latency script line {n}: {e}") from None
        return cls(entries)

    @classmethod
    def load(cls, path) -> "LatencyScript":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def next(self, conn: str) -> int:
        seq = self.by_conn.get(conn) or self.default
        if not seq:
            return 0
        i = self.used.get(conn, 0)
        self.used[conn] = i + 1
        return seq[min(i, len(seq) - 1)]


@dataclass
class Classification:
    on_time: int = 0
    faults: list = field(default_factory=list)  # (conn id, tag, lateness)


@dataclass
class FederationResult:
    trace: Trace
    exit_code: int
    error: Optional[str] = None
    grants: dict = field(default_factory=dict)
    classification: Classification = field(default_factory=Classification)
    per_federate: dict = field(default_factory=dict)


class _Federate:
    def __init__(self, sim: "Simulation", name: str, plan):
        self.sim = sim
        self.name = name
        self.plan = plan
        self.engine = Engine(sim.program, sim.config, sim.externs, sim.clock, federate=name,
                             outbound=self._outbound, mode_label=sim.mode)
        self.horizon = FOREVER if not sim.upstream.get(name) else Tag(0, 0)
        self.stp_wait = plan.stp_wait if sim.mode == "decentralized" else 0
        self.processed: list[Tag] = []

    def _outbound(self, conn: Connection, tag: Tag, value: Any) -> None:
        self.sim.send_msg(self.name, conn, tag, value)

    def ready_time(self) -> Optional[int]:
        """Virtual time at which the next tag may run, ignoring grants."""
        planned = self.engine.planned()
        if planned is None:
            return None
        return planned[0].time + self.stp_wait

    def can_step(self, now: int) -> bool:
        planned = self.engine.planned()
        if planned is None:
            return False
        tag = planned[0]
        if self.sim.mode == "centralized" and not tag < self.horizon:
            return False
        return now >= tag.time + self.stp_wait

    def step(self) -> None:
        tag, final = self.engine.planned()
        self.engine.process(tag, final)
        self.processed.append(tag)
        if self.engine.fault is not None:
            raise FederationError(f"federate {self.name} failed: {self.engine.fault}")
        if self.sim.mode == "centralized":
            self.sim.send_control(self.name, protocol.tagged("LTC", tag))
            nxt = self.engine.earliest_possible_tag()
            self.sim.send_control(self.name, protocol.tagged("NET", nxt if nxt is not None else FOREVER))


class Simulation:
    def __init__(self, program: CompiledProgram, mode: str = "centralized",
                 latencies: Optional[LatencyScript] = None, clock_script: Optional[list[ScriptEntry]] = None,
                 timeout: Optional[int] = None, externs: Optional[dict] = None,
                 jitter_seed: Optional[int] = None):
        if mode not in ("centralized", "decentralized"):
            raise ValueError(f"unknown coordination mode {mode!r}")
        ig = program.ig
        if not ig.federates:
            raise FederationError("program is not federated (use 'federated reactor')")
        if timeout is None:
            raise FederationError("federated runs need a timeout")
        self.program = program
        self.mode = mode
        self.latencies = latencies or LatencyScript()
        self.script = list(clock_script or [])
        self.externs = externs
        self.clock = VirtualClock()
        self.config = RunConfig(mode="fast", timeout=timeout, keepalive=True, jitter_seed=jitter_seed)
        self.upstream = upstream_delays(ig)
        self.plans = partition(ig)
        self.cross = {c.id: c for c in ig.connections if ig.federate_of(c.src) != ig.federate_of(c.dst)}
        if mode == "decentralized":
            for c in self.cross.values():
                if c.stp is None:
                    raise FederationError(f"decentralized mode needs an stp clause on the reaction reading '{c.dst}'")
        self.feds = {fid.name: _Federate(self, fid.name, plan) for fid, plan, _ in self.plans}
        self.rti = Rti(list(self.feds), self.upstream) if mode == "centralized" else None
        self._net: list = []
        self._seq = itertools.count()
        self._link_last: dict = {}
        self.classification = Classification()
        self.extra_records: list[TraceRecord] = []

    # -- network ---------------------------------------------------------------------

    def _enqueue(self, src: str, dst: str, m: dict, earliest: int) -> None:
        key = (src, dst)
        arrival = max(earliest, self._link_last.get(key, 0))
        self._link_last[key] = arrival
        heapq.heappush(self._net, (arrival, next(self._seq), src, dst, m))

    def send_control(self, src: str, m: dict) -> None:
        self._enqueue(src, RTI, m, self.clock.now())

    def send_msg(self, src: str, conn: Connection, tag: Tag, value: Any) -> None:
        dst = self.program.ig.federate_of(conn.dst)
        latency = self.latencies.next(conn.id)
        m = protocol.msg(conn.id, tag, value)
        m["dst"] = dst
        now = self.clock.now()
        if self.mode == "centralized":
            self._enqueue(src, RTI, m, now + latency)
        else:
            # the after-delay is realized at the sender: the message leaves
            # once its tag's time is reached
            self._enqueue(src, dst, m, max(now, tag.time) + latency)

    def _deliver(self, arrival: int, src: str, dst: str, m: dict) -> None:
        if dst == RTI:
            for to, out in self.rti.handle(src, m):
                self._enqueue(RTI, to, out, arrival)
            return
        fed = self.feds[dst]
        kind = m["type"]
        if kind == "TAG":
            fed.horizon = max(fed.horizon, protocol.tag_of(m))
            return
        if kind != "MSG":
            return
        conn = self.cross[m["conn"]]
        tag = protocol.tag_of(m)
        value = protocol.value_of(m)
        engine = fed.engine
        if self.mode == "centralized":
            if engine.finished or tag > engine.stop_tag:
                return
            try:
                engine.deliver(conn, tag, value)
            except TagInPastError as e:
                raise FederationError(f"safety violation at {dst}: {e}") from None
            return
        lateness = arrival - (tag.time + conn.stp)
        if lateness <= 0:
            self.classification.on_time += 1
            if not engine.finished and tag <= engine.stop_tag:
                engine.deliver(conn, tag, value)
            return
        self.classification.faults.append((conn.id, tag, lateness))
        if engine.finished:
            self._after_shutdown(fed, conn, tag, value, lateness)
            return
        delivered = engine.deliver(conn, tag, value, lateness)
        if delivered > engine.stop_tag:
            self._after_shutdown(fed, conn, tag, value, lateness)

    def _after_shutdown(self, fed: _Federate, conn: Connection, tag: Tag, value, lateness: int) -> None:
        engine = fed.engine
        for r in engine.by_trigger.get(conn.dst, []):
            if r.stp is None:
                continue
            self.extra_records.append(TraceRecord(
                engine.stop_tag, engine.levels[r.name], "stp_fault", r.name, {conn.dst: value}, {},
                f"lateness={format_time(lateness)}; after shutdown"))

    # -- main loop ---------------------------------------------------------------------

    def _next_time(self) -> Optional[int]:
        cands = []
        if self._net:
            cands.append(self._net[0][0])
        if self.script:
            cands.append(self.script[0].at)
        for f in self.feds.values():
            if f.engine.finished:
                continue
            t = f.ready_time()
            planned = f.engine.planned()
            if t is None:
                continue
            if self.mode == "centralized" and not planned[0] < f.horizon:
                continue
            cands.append(t)
        return min(cands) if cands else None

    def run(self) -> FederationResult:
        for f in self.feds.values():
            f.engine.start()
        error = None
        try:
            if self.rti is not None:
                for name, f in self.feds.items():
                    self.send_control(name, protocol.hello(name, len(self.feds)))
                    self.send_control(name, protocol.tagged("NET", f.engine.earliest_possible_tag()))
                for to, m in self.rti.initial():
                    self._enqueue(RTI, to, m, 0)
            while not all(f.engine.finished for f in self.feds.values()):
                now = self.clock.now()
                if self._net and self._net[0][0] <= now:
                    arrival, _, src, dst, m = heapq.heappop(self._net)
                    self._deliver(arrival, src, dst, m)
                    continue
                if self.script and self.script[0].at <= now:
                    self._feed(self.script.pop(0))
                    continue
                stepped = False
                for name in sorted(self.feds):
                    f = self.feds[name]
                    if not f.engine.finished and f.can_step(now):
                        f.step()
                        stepped = True
                        break
                if stepped:
                    continue
                t = self._next_time()
                if t is None or t <= now:
                    raise FederationError(f"federation stalled at {format_time(now)}")
                self.clock.advance_to(t)
            # drain remaining traffic so late messages are classified
            while self._net:
                arrival, _, src, dst, m = heapq.heappop(self._net)
                self.clock.advance_to(arrival)
                self._deliver(arrival, src, dst, m)
        except RclError as e:
            error = str(e)
        finally:
            for f in self.feds.values():
                f.engine.close()
        return self._result(error)

    def _feed(self, entry: ScriptEntry) -> None:
        self.clock.advance_to(entry.at)
        if entry.stall is not None:
            self.clock.stall(entry.stall)
            return
        owner = self.program.ig.federate_of(entry.action)
        fed = self.feds.get(owner)
        if fed is None:
            raise FederationError(f"clock script names unknown physical action '{entry.action}'")
        if not fed.engine.finished:
            fed.engine.inject(entry.action, entry.value, at=entry.at)

    def _result(self, error: Optional[str]) -> FederationResult:
        records = []
        for f in self.feds.values():
            records += f.engine.records
        records += self.extra_records
        header = make_header(self.program.ig.digest(), self.config.timeout, self.mode)
        trace = canonicalize(header, [])
        trace.records = dedupe_markers(sorted(records, key=TraceRecord.sort_key))
        grants = self.rti.history if self.rti is not None else {}
        return FederationResult(trace, 2 if error else 0, error, grants, self.classification,
                                {n: f.processed for n, f in self.feds.items()})


def simulate(program: CompiledProgram, mode: str = "centralized", latencies: Optional[LatencyScript] = None,
             clock_script: Optional[list[ScriptEntry]] = None, timeout: Optional[int] = None,
             externs: Optional[dict] = None, jitter_seed: Optional[int] = None) -> FederationResult:
    return Simulation(program, mode, latencies, clock_script, timeout, externs, jitter_seed).run()
