"""Federation over TCP: an RTI server process and federate clients.

All traffic goes through the RTI (star topology).  In centralized mode the
RTI also runs the grant state machine from :mod:`rti`; in decentralized
mode it only relays messages and distributes the start time.
"""

from __future__ import annotations

import logging
import socket
import threading
import time
from typing import Any, Optional

from ..compiler import CompiledProgram
from ..errors import FederationError, ProtocolError, RclError
from ..model import Connection
from ..runtime.clock import MonotonicClock, VirtualClock
from ..runtime.engine import Engine, RunConfig, ScriptEntry
from ..tags import FOREVER, Tag, format_time, tag_delay
from ..trace import TraceRecord
from . import protocol
from .partition import partition, upstream_delays
from .rti import Rti

log = logging.getLogger(__name__)

START_SLACK_NS = 50_000_000  # start shortly after everybody connected
HEARTBEAT_S = 0.005


def parse_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bad address {addr!r}, expected HOST:PORT")
    return host, int(port)


class RtiServer:
    def __init__(self, program: CompiledProgram, mode: str, timeout: int, host: str = "127.0.0.1", port: int = 0):
        ig = program.ig
        self.names = list(ig.federates)
        self.mode = mode
        self.timeout = timeout
        self.core = Rti(self.names, upstream_delays(ig)) if mode == "centralized" else None
        self.lock = threading.Lock()
        self.socks: dict[str, socket.socket] = {}
        self.send_locks: dict[str, threading.Lock] = {}
        self.done: set = set()
        self.error: Optional[str] = None
        self.listener = socket.create_server((host, port))
        self.address = "%s:%d" % self.listener.getsockname()[:2]
        self.finished = threading.Event()

    def _send(self, name: str, m: dict) -> None:
        with self.send_locks[name]:
            protocol.send(self.socks[name], m)

    def serve(self, accept_timeout: float = 30.0) -> Optional[str]:
        self.listener.settimeout(accept_timeout)
        pending = []
        try:
            while len(pending) < len(self.names):
                conn, _ = self.listener.accept()
                conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                conn.settimeout(None)
                m = protocol.recv(conn)
                if m is None or m["type"] != "HELLO" or m.get("federate") not in self.names:
                    conn.close()
                    raise ProtocolError(f"bad HELLO: {m!r}")
                name = m["federate"]
                if name in self.socks:
                    raise ProtocolError(f"federate {name} connected twice")
                self.socks[name] = conn
                self.send_locks[name] = threading.Lock()
                pending.append(name)
        except (OSError, ProtocolError) as e:
            self._abort(f"RTI setup failed: {e}")
            return self.error
        finally:
            self.listener.close()
        start_ns = time.monotonic_ns() + START_SLACK_NS
        for name in self.names:
            self._send(name, protocol.hello("rti", len(self.names), start_ns=start_ns))
            self._send(name, protocol.tagged("STOP", Tag(self.timeout, 0)))
        if self.core is not None:
            with self.lock:
                for to, m in self.core.initial():
                    self._send(to, m)
        threads = [threading.Thread(target=self._session, args=(n,), daemon=True) for n in self.names]
        for t in threads:
            t.start()
        self.finished.wait()
        for s in self.socks.values():
            try:
                s.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            s.close()
        return self.error

    def _abort(self, message: str) -> None:
        if self.error is None:
            self.error = message
            log.error(message)
        self.finished.set()

    def _session(self, name: str) -> None:
        sock = self.socks[name]
        try:
            while True:
                m = protocol.recv(sock)
                if m is None:
                    if name not in self.done:
                        self._abort(f"federate {name} disconnected before finishing")
                    return
                with self.lock:
                    self._dispatch(name, m)
        except (OSError, RclError, ValueError) as e:
            if not self.finished.is_set():
                self._abort(f"session {name}: {e}")

    def _dispatch(self, name: str, m: dict) -> None:
        if m["type"] == "NET" and protocol.tag_of(m) == FOREVER:
            self.done.add(name)
        if self.core is not None:
            out = self.core.handle(name, m)
        else:
            out = [(m["dst"], m)] if m["type"] == "MSG" else []
        for to, msg in out:
            if to not in self.done or msg["type"] == "MSG":
                try:
                    self._send(to, msg)
                except OSError:
                    pass
        if len(self.done) == len(self.names):
            self.finished.set()


class FederateClient:
    """Runs one federate's engine against a remote RTI."""

    def __init__(self, program: CompiledProgram, name: str, rti_addr: str, mode: str, timeout: int,
                 fast: bool = False, externs: Optional[dict] = None, workers: int = 1,
                 clock_script: Optional[list[ScriptEntry]] = None, jitter_seed: Optional[int] = None):
        if name not in program.ig.federates:
            raise FederationError(f"no federate named {name!r}")
        if mode == "decentralized" and fast:
            raise FederationError("decentralized coordination needs real time (drop --fast)")
        self.program = program
        self.name = name
        self.mode = mode
        self.fast = fast
        self.addr = parse_addr(rti_addr)
        self.timeout = timeout
        self.script = sorted(clock_script or [], key=lambda e: e.at)
        self.cond = threading.Condition()
        self.horizon = Tag(0, 0)
        plan = next(p for fid, p, _ in partition(program.ig) if fid.name == name)
        self.cross = {c.id: c for c in plan.inbound}
        if mode == "decentralized":
            for c in plan.inbound:
                if c.stp is None:
                    raise FederationError(f"decentralized mode needs an stp clause on the reaction reading '{c.dst}'")
        self.stp_wait = plan.stp_wait if mode == "decentralized" else 0
        if not upstream_delays(program.ig).get(name) or mode == "decentralized":
            self.horizon = FOREVER
        self.has_physical = any(a.origin == "physical" and program.ig.federate_of(a.fqn) == name
                                for a in program.ig.actions.values())
        self.config = RunConfig(mode="fast" if fast else "realtime", workers=workers, timeout=timeout,
                                keepalive=True, jitter_seed=jitter_seed)
        self.clock = VirtualClock() if fast else None
        self.engine: Optional[Engine] = None
        self.externs = externs
        self.sock: Optional[socket.socket] = None
        self.send_lock = threading.Lock()
        self.releases: list[threading.Timer] = []
        self.extra: list[TraceRecord] = []
        self.closed = threading.Event()
        self.error: Optional[str] = None
        self.last_net: Optional[Tag] = None
        self.last_ltc: Optional[Tag] = None

    def _send(self, m: dict) -> None:
        with self.send_lock:
            protocol.send(self.sock, m)

    def _outbound(self, conn: Connection, tag: Tag, value: Any) -> None:
        m = protocol.msg(conn.id, tag, value)
        m["dst"] = self.program.ig.federate_of(conn.dst)
        if self.mode == "decentralized":
            wait = (tag.time - self.engine.clock.now()) / 1e9
            if wait > 0:
                t = threading.Timer(wait, self._send, args=(m,))
                t.daemon = True
                self.releases.append(t)
                t.start()
                return
        self._send(m)

    def connect(self) -> None:
        deadline = time.monotonic() + 10
        while True:
            try:
                self.sock = socket.create_connection(self.addr, timeout=10)
                break
            except OSError:
                if time.monotonic() > deadline:
                    raise
                time.sleep(0.05)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.sock.settimeout(None)
        self._send(protocol.hello(self.name, len(self.program.ig.federates)))
        reply = protocol.recv(self.sock)
        if reply is None or reply["type"] != "HELLO":
            raise ProtocolError(f"expected HELLO from RTI, got {reply!r}")
        stop = protocol.recv(self.sock)
        if stop is None or stop["type"] != "STOP":
            raise ProtocolError(f"expected STOP from RTI, got {stop!r}")
        clock = self.clock or MonotonicClock(start_ns=reply["start_ns"])
        self.engine = Engine(self.program, self.config, self.externs, clock, federate=self.name,
                             outbound=self._outbound, mode_label=self.mode)
        self.engine.stop_tag = min(self.engine.stop_tag, protocol.tag_of(stop))

    def _reader(self) -> None:
        try:
            while True:
                m = protocol.recv(self.sock)
                if m is None:
                    break
                self._on_message(m)
        except (OSError, RclError, ValueError) as e:
            if not self.engine.finished:
                self.error = f"connection to RTI failed: {e}"
        finally:
            self.closed.set()
            with self.cond:
                self.cond.notify_all()
            with self.engine.cond:
                self.engine.cond.notify_all()

    def _on_message(self, m: dict) -> None:
        if m["type"] == "TAG":
            with self.cond:
                self.horizon = max(self.horizon, protocol.tag_of(m))
                self.cond.notify_all()
            with self.engine.cond:
                self.engine.cond.notify_all()
            return
        if m["type"] != "MSG":
            return
        conn = self.cross.get(m["conn"])
        if conn is None:
            raise ProtocolError(f"{self.name} received MSG for unknown connection {m['conn']}")
        tag, value = protocol.tag_of(m), protocol.value_of(m)
        engine = self.engine
        lateness = None
        if self.mode == "decentralized":
            arrival = engine.clock.now()
            if arrival > tag.time + conn.stp:
                lateness = arrival - (tag.time + conn.stp)
        if engine.finished or tag > engine.stop_tag:
            if lateness is not None:
                for r in engine.by_trigger.get(conn.dst, []):
                    if r.stp is not None:
                        self.extra.append(TraceRecord(
                            engine.stop_tag, engine.levels[r.name], "stp_fault", r.name, {conn.dst: value}, {},
                            f"lateness={format_time(lateness)}; after shutdown"))
            return
        delivered = engine.deliver(conn, tag, value, lateness)
        if lateness is not None and delivered > engine.stop_tag:
            for r in engine.by_trigger.get(conn.dst, []):
                if r.stp is not None:
                    self.extra.append(TraceRecord(
                        engine.stop_tag, engine.levels[r.name], "stp_fault", r.name, {conn.dst: value}, {},
                        f"lateness={format_time(lateness)}; after shutdown"))

    def _feed(self, entry: ScriptEntry) -> None:
        # caller holds engine.cond
        engine = self.engine
        if self.fast:
            engine._feed(entry)
        elif entry.stall is None:
            a = engine.actions.get(entry.action)
            if a is None:
                raise FederationError(f"clock script names unknown physical action '{entry.action}'")
            engine.queue.push(engine._assign_tag(entry.at + a.min_delay), entry.action, entry.value)

    def _earliest(self) -> Tag:
        e = self.engine
        head = e.earliest_possible_tag() or FOREVER
        if self.script:
            head = min(head, Tag(self.script[0].at, 0))
        if self.has_physical and not self.fast:
            head = min(head, Tag(e.clock.now(), 0))
        if self.last_ltc is not None:
            head = max(head, tag_delay(self.last_ltc, 0))
        return head

    def _report(self, force: bool = False) -> None:
        if self.mode != "centralized":
            return
        net = self._earliest()
        if force or self.last_net is None or net > self.last_net:
            self.last_net = net
            self._send(protocol.tagged("NET", net))

    def run(self):
        self.connect()
        engine = self.engine
        engine.start()
        reader = threading.Thread(target=self._reader, daemon=True)
        reader.start()
        self._report(force=True)
        try:
            while not engine.finished:
                if self.error:
                    raise FederationError(self.error)
                if self.closed.is_set():
                    raise FederationError("the RTI closed the connection (federation aborted)")
                with engine.cond:
                    planned = engine.planned()
                    if self.script and (planned is None or self.script[0].at <= planned[0].time):
                        entry = self.script[0]
                        if self.fast or engine.clock.now() >= entry.at:
                            self.script.pop(0)
                            self._feed(entry)
                            continue
                    if planned is None:
                        engine.cond.wait(HEARTBEAT_S)
                        continue
                    tag, final = planned
                    if not tag < self.horizon:
                        engine.cond.wait(HEARTBEAT_S)
                        allowed = False
                    elif not self.fast and engine.clock.now() < tag.time + self.stp_wait:
                        wait = (tag.time + self.stp_wait - engine.clock.now()) / 1e9
                        engine.cond.wait(min(wait, HEARTBEAT_S) if self.has_physical else wait)
                        allowed = False
                    else:
                        allowed = True
                        if self.fast:
                            engine.clock.advance_to(tag.time)
                if not allowed:
                    self._report()
                    continue
                engine.process(tag, final)
                if engine.fault is not None:
                    return self._finish()
                if final:
                    for t in self.releases:
                        t.join()
                if self.mode == "centralized":
                    self.last_ltc = tag
                    self._send(protocol.tagged("LTC", tag))
                self._report(force=True)
            if self.mode == "decentralized":
                for t in self.releases:
                    t.join()
                self._send(protocol.tagged("NET", FOREVER))
            elif self.last_net != FOREVER:
                self._send(protocol.tagged("NET", FOREVER))
            self.closed.wait(10)
        except (RclError, OSError) as e:
            engine.fault = engine.fault or str(e)
        return self._finish()

    def _finish(self):
        engine = self.engine
        engine.close()
        if self.sock is not None:
            self.sock.close()
        result = engine.result()
        result.trace.records = sorted(result.trace.records + self.extra, key=TraceRecord.sort_key)
        return result
