"""The discrete-event engine.

One :class:`Engine` runs a compiled program (or one federate of it).  Tags
are processed in order; at each tag the triggered reactions execute level
by level.  Writes made at a level become visible only once the level is
complete, so the outcome does not depend on how the reactions of one
level are interleaved across worker threads.
"""

from __future__ import annotations

import json
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from ..compiler import CompiledProgram
from ..dsl.script import compile_script, parse_script
from ..errors import BodyError, RclError, RuntimeFault, ShutdownInProgress
from ..graph import dispatch_key
from ..model import SHUTDOWN, STARTUP, Connection, ReactionInstance
from ..tags import ZERO, Tag, format_time, parse_time, tag_delay, timer_next, tag_to_json
from ..trace import MARKER_LEVEL, Trace, TraceRecord, canonicalize, make_header
from ..values import ABSENT, coerce
from .clock import MonotonicClock, VirtualClock
from .queue import EventQueue

MAX_JITTER_SLEEP = 100e-6  # seconds
STATUSES = ("success", "failure", "running")


@dataclass
class RunConfig:
    mode: str = "fast"  # "fast" | "realtime"
    workers: int = 1
    timeout: Optional[int] = None  # ns; stop tag is (timeout, 0)
    trace_path: Optional[str] = None
    jitter_seed: Optional[int] = None
    keepalive: Optional[bool] = None  # default: keep running while physical actions exist

    def __post_init__(self):
        if self.mode not in ("fast", "realtime"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.timeout is not None and self.timeout < 0:
            raise ValueError("timeout must be non-negative")


@dataclass(frozen=True)
class ScriptEntry:
    at: int
    action: Optional[str] = None
    value: Any = None
    stall: Optional[int] = None


def _time_field(v) -> int:
    if isinstance(v, bool):
        raise ValueError(f"bad time {v!r}")
    if isinstance(v, int):
        return v
    return parse_time(str(v))


def parse_clock_script(text: str) -> list[ScriptEntry]:
    """Parse JSON-lines clock script entries, sorted stably by time."""
    entries = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            at = _time_field(obj["at_physical"])
            if "stall" in obj:
                entries.append(ScriptEntry(at, stall=_time_field(obj["stall"])))
            else:
                entries.append(ScriptEntry(at, obj["action"], obj.get("value")))
        except (KeyError, ValueError, TypeError) as e:
            raise ValueError(f"clock script line {n}: {e}") from None
    return sorted(entries, key=lambda e: e.at)


def load_clock_script(path) -> list[ScriptEntry]:
    return parse_clock_script(Path(path).read_text(encoding="utf-8"))


class ReactionContext:
    """What a reaction body sees: its triggers, state, and effect buffer."""

    def __init__(self, engine: "Engine", reaction: ReactionInstance, tag: Tag, values: dict):
        self._engine = engine
        self._r = reaction
        self._values = values
        self.tag = tag
        self.state = engine.state[reaction.owner]
        self.params = engine.ig.reactors[reaction.owner].params
        self.writes: dict = {}
        self.schedules: list = []
        self.logs: list = []
        self.stop = False

    def _fqn(self, local: str) -> str:
        fqn = self._r.local.get(local)
        if fqn is None:
            raise BodyError(f"'{local}' is not declared by {self._r.name}")
        return fqn

    def read(self, local: str):
        fqn = self._fqn(local)
        if fqn not in self._r.triggers and fqn not in self._r.sources:
            raise BodyError(f"'{local}' is not a trigger or source of {self._r.name}")
        return self._values.get(fqn, ABSENT)

    def present(self, local: str) -> bool:
        return self.read(local) is not ABSENT

    def set(self, local: str, value=None) -> None:
        fqn = self._fqn(local)
        port = self._engine.ig.ports.get(fqn)
        if port is None or fqn not in self._r.effects:
            raise BodyError(f"'{local}' is not an effect port of {self._r.name}")
        try:
            self.writes[fqn] = coerce(port.type, value)
        except RclError as e:
            raise BodyError(f"set({local}): {e}") from None

    def schedule(self, local: str, delay: int = 0, value=None) -> None:
        fqn = self._fqn(local)
        action = self._engine.ig.actions.get(fqn)
        if action is None or fqn not in self._r.effects:
            raise BodyError(f"'{local}' is not an effect action of {self._r.name}")
        if delay < 0:
            raise BodyError("schedule delay must be non-negative")
        try:
            self.schedules.append((fqn, delay, coerce(action.type, value)))
        except RclError as e:
            raise BodyError(f"schedule({local}): {e}") from None

    def log(self, text: str) -> None:
        self.logs.append(str(text))

    def request_stop(self) -> None:
        self.stop = True

    def physical_time(self) -> int:
        return self._engine.clock.now()


@dataclass
class _Invocation:
    reaction: ReactionInstance
    kind: str
    ctx: ReactionContext
    inputs: dict
    sleep: float = 0.0
    started: int = 0
    result: Any = None
    error: Optional[str] = None
    note: Optional[str] = None


@dataclass
class RunResult:
    trace: Trace
    phys: list
    exit_code: int
    error: Optional[str] = None


class Engine:
    def __init__(self, program: CompiledProgram, config: Optional[RunConfig] = None,
                 externs: Optional[dict] = None, clock=None, federate: Optional[str] = None,
                 outbound: Optional[Callable[[Connection, Tag, Any], None]] = None,
                 mode_label: Optional[str] = None):
        self.program = program
        self.ig = program.ig
        self.levels = program.levels
        self.config = config or RunConfig()
        self.externs = dict(externs or {})
        self.federate = federate
        self.outbound = outbound
        self.mode_label = mode_label or self.config.mode
        if clock is None:
            clock = VirtualClock() if self.config.mode == "fast" else MonotonicClock()
        self.clock = clock

        def mine(owner: str) -> bool:
            return federate is None or self.ig.federate_of(owner) == federate

        self.reactions = [r for r in self.ig.reactions if mine(r.owner)]
        self.by_name = {r.name: r for r in self.reactions}
        self.timers = {k: t for k, t in self.ig.timers.items() if mine(t.owner)}
        self.actions = {k: a for k, a in self.ig.actions.items() if mine(a.owner)}
        self.state = {fqn: dict(r.state) for fqn, r in self.ig.reactors.items() if mine(fqn)}
        self.by_trigger: dict[str, list[ReactionInstance]] = {}
        for r in self.reactions:
            for t in r.triggers:
                self.by_trigger.setdefault(t, []).append(r)
        self.conns_from: dict[str, list[Connection]] = {}
        for c in self.ig.connections:
            self.conns_from.setdefault(c.src, []).append(c)

        keep = self.config.keepalive
        if keep is None:
            keep = any(a.origin == "physical" for a in self.actions.values())
        self.keepalive = keep

        self.queue = EventQueue()
        self.cond = threading.Condition()
        self.tag: Optional[Tag] = None  # last processed tag
        self.ran_at_tag = False
        self.stop_tag = Tag(self.config.timeout, 0) if self.config.timeout is not None else None
        self.started = False
        self.finished = False
        self.fault: Optional[str] = None
        self.records: list[TraceRecord] = []
        self.phys: list[dict] = []
        self.timer_index: dict[str, int] = {}
        self._rng = random.Random(self.config.jitter_seed) if self.config.jitter_seed is not None else None
        self._pool: Optional[ThreadPoolExecutor] = None
        self._bodies: dict = {}
        self._compile_bodies()

    # -- setup --------------------------------------------------------------------

    def _compile_body(self, r: ReactionInstance, body):
        if body.kind == "extern":
            fn = self.externs.get(body.text)
            if fn is None:
                raise RuntimeFault(f"unresolved extern callback '{body.text}' for {r.name}")
            return fn
        line, col = (body.loc.line, body.loc.col) if body.loc else (1, 1)
        script = parse_script(body.text, r.file, line, col)
        owner = self.ig.reactors[r.owner]
        return compile_script(script, set(owner.state_types), set(owner.params))

    def _compile_bodies(self) -> None:
        for r in self.reactions:
            self._bodies[(r.name, "reaction")] = self._compile_body(r, r.body)
            if r.deadline is not None:
                self._bodies[(r.name, "deadline_handler")] = self._compile_body(r, r.deadline.body)
            if r.stp is not None:
                self._bodies[(r.name, "stp_fault")] = self._compile_body(r, r.stp.body)

    def start(self) -> None:
        """Seed the startup event and the first occurrence of every timer."""
        with self.cond:
            if self.started:
                return
            self.started = True
            self.queue.push(ZERO, STARTUP)
            for fqn, t in sorted(self.timers.items()):
                self.timer_index[fqn] = 0
                self.queue.push(timer_next(t.offset, t.period, 0), fqn)
            self.records.append(TraceRecord(ZERO, MARKER_LEVEL, "startup", ""))
        if self.config.workers > 1:
            self._pool = ThreadPoolExecutor(max_workers=self.config.workers, thread_name_prefix="rcl-worker")

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    # -- thread-safe entry points -------------------------------------------------------

    def _assign_tag(self, now: int) -> Tag:
        cur = self.tag if self.tag is not None else ZERO
        if now > cur.time:
            return Tag(now, 0)
        return tag_delay(cur, 0)

    def inject(self, action: str, value=None, at: Optional[int] = None) -> Tag:
        """Schedule a physical action from any thread; returns the assigned tag."""
        a = self.actions.get(action)
        if a is None:
            raise KeyError(f"no physical action '{action}'")
        if a.origin != "physical":
            raise ValueError(f"'{action}' is a logical action")
        value = coerce(a.type, value)
        with self.cond:
            if self.finished or self._final_started:
                raise ShutdownInProgress(f"cannot inject '{action}': shutdown in progress")
            now = self.clock.now() if at is None else at
            tag = self._assign_tag(now + a.min_delay)
            self.queue.push(tag, action, value)
            self.cond.notify_all()
            return tag

    _final_started = False

    def deliver(self, conn: Connection, tag: Tag, value, lateness: Optional[int] = None) -> Tag:
        """Hand a message from another federate to this engine.

        Late messages (``lateness`` set) go to the earliest tag that has not
        been processed yet.
        """
        with self.cond:
            if lateness is not None and self.tag is not None and tag <= self.tag:
                tag = tag_delay(self.tag, 0)
            self.queue.push(tag, conn.dst, value, lateness)
            self.cond.notify_all()
            return tag

    def request_stop(self) -> None:
        with self.cond:
            cur = self.tag if self.tag is not None else ZERO
            t = tag_delay(cur, 0)
            if self.stop_tag is None or t < self.stop_tag:
                self.stop_tag = t
            self.cond.notify_all()

    # -- planning --------------------------------------------------------------------

    def earliest_possible_tag(self) -> Optional[Tag]:
        planned = self.planned()
        return planned[0] if planned else None

    def planned(self) -> Optional[tuple[Tag, bool]]:
        """Next (tag, is_final) to process, or None when idle or finished."""
        if self.finished:
            return None
        head = self.queue.peek_tag()
        if head is None and not self.keepalive:
            if self.tag is None:
                return ZERO, True
            if self.ran_at_tag:
                return tag_delay(self.tag, 0), True
            return self.tag, True
        if self.stop_tag is not None and (head is None or head >= self.stop_tag):
            return self.stop_tag, True
        if head is None:
            return None
        return head, False

    # -- execution ---------------------------------------------------------------------

    def process(self, tag: Tag, final: bool) -> None:
        """Execute everything at ``tag``; with ``final``, also shut down there."""
        with self.cond:
            events = []
            if self.queue.peek_tag() == tag:
                _, events = self.queue.pop_tag()
            elif self.tag is None or tag > self.tag:
                self.queue.current = tag
                self.queue.assembling = False
            if final:
                self._final_started = True
            if self.tag != tag:
                self.ran_at_tag = False
            self.tag = tag
        self._execute(tag, events, final)
        if final or self.fault is not None:
            with self.cond:
                self.finished = True
                self.cond.notify_all()

    def _rearm(self, fqn: str) -> None:
        t = self.timers[fqn]
        if t.period <= 0:
            return
        k = self.timer_index[fqn] + 1
        self.timer_index[fqn] = k
        self.queue.push(timer_next(t.offset, t.period, k), fqn)

    def _execute(self, tag: Tag, events: list, final: bool) -> None:
        values: dict = {}
        late: dict = {}
        with self.cond:
            for ev in events:
                values[ev.trigger] = ev.value
                if ev.late is not None:
                    late[ev.trigger] = ev.late
                if ev.trigger in self.timers:
                    self._rearm(ev.trigger)
        if final:
            values[SHUTDOWN] = None
        pending: dict[int, set] = {}

        def trigger(fqn: str) -> None:
            for r in self.by_trigger.get(fqn, ()):
                pending.setdefault(self.levels[r.name], set()).add(r.name)

        for trig in list(values):
            trigger(trig)
        while pending and self.fault is None:
            level = min(pending)
            batch = sorted((self.by_name[n] for n in pending.pop(level)),
                           key=lambda r: dispatch_key(r.name, r.deadline_ns))
            invocations = [self._prepare(r, tag, values, late) for r in batch]
            self._run_batch(invocations)
            self.ran_at_tag = True
            for inv in sorted(invocations, key=lambda i: i.reaction.name):
                self._commit(inv, tag, level, values, trigger)
        if final and self.fault is None:
            self.records.append(TraceRecord(tag, MARKER_LEVEL, "shutdown", ""))

    def _prepare(self, r: ReactionInstance, tag: Tag, values: dict, late: dict) -> _Invocation:
        inputs = {fqn: values.get(fqn, ABSENT) for fqn in r.triggers + r.sources}
        kind, note = "reaction", None
        lateness = [late[t] for t in r.triggers if t in late and t in values]
        if lateness and r.stp is not None:
            kind, note = "stp_fault", f"lateness={format_time(max(lateness))}"
        ctx = ReactionContext(self, r, tag, values)
        sleep = self._rng.random() * MAX_JITTER_SLEEP if self._rng is not None else 0.0
        return _Invocation(r, kind, ctx, inputs, sleep, note=note)

    def _invoke(self, inv: _Invocation, tag: Tag) -> None:
        if inv.sleep:
            time.sleep(inv.sleep)
        r = inv.reaction
        now = self.clock.now()
        inv.started = now
        if inv.kind == "reaction" and r.deadline is not None and now - tag.time > r.deadline.bound:
            inv.kind = "deadline_handler"
        body = self._bodies[(r.name, inv.kind)]
        try:
            inv.result = body(inv.ctx)
        except RclError as e:
            inv.error = str(e)
        except Exception as e:  # host callbacks may raise anything
            inv.error = f"{type(e).__name__}: {e}"

    def _run_batch(self, invocations: list) -> None:
        tag = self.tag
        if self._pool is None or len(invocations) == 1:
            for inv in invocations:
                self._invoke(inv, tag)
            return
        futures = [self._pool.submit(self._invoke, inv, tag) for inv in invocations]
        for f in futures:
            f.result()

    def _commit(self, inv: _Invocation, tag: Tag, level: int, values: dict, trigger) -> None:
        r, ctx = inv.reaction, inv.ctx
        notes = [inv.note] if inv.note else []
        notes += ctx.logs
        self.phys.append({"tag": tag_to_json(tag), "subject": r.name, "kind": inv.kind,
                          "physical": inv.started, "lag": inv.started - tag.time})
        if inv.error is None and r.result_port is not None:
            if inv.result not in STATUSES:
                inv.error = f"a behavior leaf must return success, failure or running, not {inv.result!r}"
            else:
                ctx.writes[r.result_port] = inv.result
        if inv.error is not None:
            notes.append(f"error: {inv.error}")
            self.fault = f"{r.name} at {tag}: {inv.error}"
        outputs = dict(ctx.writes)
        for fqn, _, v in ctx.schedules:
            outputs[fqn] = v
        self.records.append(TraceRecord(tag, level, inv.kind, r.name, inv.inputs, outputs,
                                        "; ".join(notes) if notes else None))
        if inv.error is not None:
            return
        with self.cond:
            for fqn, v in ctx.writes.items():
                values[fqn] = v
                trigger(fqn)
                for c in self.conns_from.get(fqn, ()):
                    if self.federate is not None and self.ig.federate_of(c.dst) != self.federate:
                        if self.outbound is not None:
                            self.outbound(c, tag_delay(tag, c.delay or 0), v)
                    elif c.delay is None:
                        values[c.dst] = v
                        trigger(c.dst)
                    else:
                        self.queue.push(tag_delay(tag, c.delay), c.dst, v)
            for fqn, delay, v in ctx.schedules:
                a = self.ig.actions[fqn]
                if a.origin == "physical":
                    target = self._assign_tag(self.clock.now() + a.min_delay + delay)
                    target = max(target, tag_delay(tag, 0))
                else:
                    target = tag_delay(tag, a.min_delay + delay)
                self.queue.push(target, fqn, v)
            if ctx.stop:
                t = tag_delay(tag, 0)
                if self.stop_tag is None or t < self.stop_tag:
                    self.stop_tag = t

    # -- standalone driver ----------------------------------------------------------

    def run(self, script: Optional[list[ScriptEntry]] = None) -> RunResult:
        script = list(script or [])
        self.start()
        feeder = None
        try:
            if self.config.mode == "realtime" and script:
                feeder = threading.Thread(target=self._feed_realtime, args=(script,), daemon=True)
                feeder.start()
                script = []
            while not self.finished:
                with self.cond:
                    planned = self.planned()
                    if self.config.mode == "fast":
                        if script and (planned is None or script[0].at <= planned[0].time):
                            self._feed(script.pop(0))
                            continue
                        if planned is None:
                            # nothing can ever arrive: stop as if idle
                            self.keepalive = False
                            continue
                        self.clock.advance_to(planned[0].time)
                    else:
                        if planned is None:
                            self.cond.wait(0.05)
                            continue
                        if self.clock.now() < planned[0].time:
                            self.clock.sleep_until(planned[0].time, self.cond)
                            continue
                tag, final = planned
                self.process(tag, final)
        except RclError as e:
            self.fault = self.fault or str(e)
            with self.cond:
                self.finished = True
        finally:
            self.close()
        return self.result()

    def _feed(self, entry: ScriptEntry) -> None:
        # caller holds self.cond (reentrant use via inject is avoided)
        self.clock.advance_to(entry.at)
        if entry.stall is not None:
            self.clock.stall(entry.stall)
            return
        a = self.actions.get(entry.action)
        if a is None:
            raise RuntimeFault(f"clock script names unknown physical action '{entry.action}'")
        tag = self._assign_tag(entry.at + a.min_delay)
        self.queue.push(tag, entry.action, coerce(a.type, entry.value))

    def _feed_realtime(self, script: list[ScriptEntry]) -> None:
        for entry in script:
            if entry.stall is not None:
                continue
            delay = entry.at - self.clock.now()
            if delay > 0:
                time.sleep(delay / 1e9)
            try:
                self.inject(entry.action, entry.value, at=entry.at)
            except (ShutdownInProgress, RclError, KeyError):
                return

    def result(self) -> RunResult:
        header = make_header(self.ig.digest(), self.config.timeout, self.mode_label)
        trace = canonicalize(header, self.records)
        phys = sorted(self.phys, key=lambda p: (p["tag"]["t"], p["tag"]["m"], p["subject"]))
        if self.config.trace_path:
            write_trace(trace, phys, self.config.trace_path)
        return RunResult(trace, phys, 2 if self.fault else 0, self.fault)


def sidecar_path(trace_path) -> Path:
    p = Path(trace_path)
    name = p.name[:-len(".jsonl")] if p.name.endswith(".jsonl") else p.name
    return p.with_name(name + ".phys.jsonl")


def write_trace(trace: Trace, phys: list, path) -> None:
    trace.write(path)
    with open(sidecar_path(path), "w", encoding="utf-8") as f:
        for p in phys:
            f.write(json.dumps(p, separators=(",", ":")) + "\n")


def run_program(program: CompiledProgram, config: Optional[RunConfig] = None,
                script: Optional[list[ScriptEntry]] = None, externs: Optional[dict] = None,
                clock=None) -> RunResult:
    engine = Engine(program, config, externs, clock)
    return engine.run(script)
