import threading
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import timer_tags
from rcl.compiler import compile_source
from rcl.errors import RuntimeFault, ShutdownInProgress, TagInPastError
from rcl.runtime.clock import VirtualClock
from rcl.runtime.engine import (Engine, RunConfig, ScriptEntry, parse_clock_script, run_program,
                                sidecar_path)
from rcl.runtime.queue import EventQueue
from rcl.tags import MSEC, Tag

COUNTER = """
main reactor {
  timer t(0, 30 ms)
  state k: int = 0
  reaction(t) {= k = k + 1 =}
}
"""

DELAYS = """
main reactor {
  s = new Src()
  near = new Sink()
  far = new Sink()
  s.y -> near.x after 0
  s.y -> far.x after 10 ms
}
reactor Src {
  timer t(2 ms, 7 ms)
  output y: int
  state n: int = 0
  reaction(t) -> y {=
    n = n + 1
    set(y, n)
  =}
}
reactor Sink {
  input x: int
  reaction(x) {= log(x) =}
}
"""

PEDAL = """
main reactor {
  physical action button
  timer t(0, 30 ms)
  reaction(button) {= log("pressed") =}
  reaction(t) {= =}
}
"""


def reactions(result, subject=None):
    return [r for r in result.trace.records
            if r.kind not in ("startup", "shutdown") and (subject is None or r.subject == subject)]


def vision_run(vision, script, timeout=100 * MSEC, **kw):
    return run_program(vision, RunConfig(timeout=timeout, **kw), script)


# -- event queue ----------------------------------------------------------------

def test_queue_orders_by_tag():
    q = EventQueue()
    for t in (30, 0, 60):
        q.push(Tag(t * MSEC, 0), f"e{t}")
    assert [q.pop_tag()[0].time for _ in range(3)] == [0, 30 * MSEC, 60 * MSEC]


def test_queue_groups_same_tag_fifo():
    q = EventQueue()
    q.push(Tag(5, 0), "a")
    q.push(Tag(5, 0), "b")
    q.push(Tag(5, 0), "a")
    tag, batch = q.pop_tag()
    assert tag == Tag(5, 0) and [e.trigger for e in batch] == ["a", "b", "a"]
    assert len(q) == 0


def test_queue_rejects_past():
    q = EventQueue()
    q.push(Tag(10 * MSEC, 1), "x")
    q.pop_tag()
    with pytest.raises(TagInPastError):
        q.push(Tag(10 * MSEC, 0), "y")
    with pytest.raises(TagInPastError):
        q.push(Tag(10 * MSEC, 1), "y")
    q.push(Tag(10 * MSEC, 2), "y")


def test_startup_assembly_allows_current_tag():
    q = EventQueue()
    q.current = Tag(0, 0)
    q.push(Tag(0, 0), "startup")


# -- timers, delays, startup/shutdown ------------------------------------------------

def test_timer_counts_match_oracle(compile_text):
    result = run_program(compile_text(COUNTER), RunConfig(timeout=100 * MSEC))
    got = [(r.tag.time, r.tag.microstep) for r in reactions(result)]
    assert got == timer_tags(0, 30 * MSEC, 100 * MSEC)
    assert len(got) == 4


def test_empty_program(compile_text):
    result = run_program(compile_text("main reactor {}"), RunConfig())
    assert result.exit_code == 0
    assert [(r.kind, r.tag) for r in result.trace.records] == [("startup", Tag(0, 0)), ("shutdown", Tag(0, 0))]


def test_after_delays(compile_text):
    result = run_program(compile_text(DELAYS), RunConfig(timeout=40 * MSEC))
    sends = {r.outputs["s.y"]: r.tag for r in reactions(result, "s.reaction1")}
    near = reactions(result, "near.reaction1")
    far = reactions(result, "far.reaction1")
    assert near and far
    for r in near:
        src = sends[r.inputs["near.x"]]
        assert r.tag == Tag(src.time, src.microstep + 1)
    for r in far:
        src = sends[r.inputs["far.x"]]
        assert r.tag == Tag(src.time + 10 * MSEC, 0)
    # a message whose tag falls after the stop tag is never delivered
    assert max(r.tag for r in far) <= Tag(40 * MSEC, 0)


def test_shutdown_reaction_runs_at_stop_tag(compile_text):
    text = "main reactor {\n timer t(0, 4 ms)\n reaction(shutdown) {= log(\"bye\") =}\n reaction(t) {= =}\n}"
    result = run_program(compile_text(text), RunConfig(timeout=10 * MSEC))
    bye = reactions(result, "main.reaction1")
    assert [(r.tag, r.note) for r in bye] == [(Tag(10 * MSEC, 0), "bye")]
    assert result.trace.records[-1].kind == "shutdown"


def test_multiple_triggers_one_invocation(compile_text):
    text = """
main reactor {
  timer a(5 ms)
  timer b(5 ms)
  reaction(a, b) {= log(present(a), present(b)) =}
}
"""
    result = run_program(compile_text(text), RunConfig(timeout=10 * MSEC))
    assert [r.note for r in reactions(result)] == ["true true"]


# -- deadlines ---------------------------------------------------------------------

@pytest.mark.parametrize("lag_ms,kind", [(5, "deadline_handler"), (1, "reaction"), (3, "reaction")])
def test_deadline_lag(vision, lag_ms, kind):
    script = [ScriptEntry(20 * MSEC, "robot.pedal.button"), ScriptEntry(20 * MSEC, stall=lag_ms * MSEC)]
    result = vision_run(vision, script)
    (rec,) = reactions(result, "robot.stop.reaction1")
    assert rec.tag == Tag(20 * MSEC, 0)
    assert rec.kind == kind
    phys = [p for p in result.phys if p["subject"] == "robot.stop.reaction1"]
    assert phys[0]["lag"] == lag_ms * MSEC


def test_deadline_exclusive(vision):
    script = parse_clock_script('{"at_physical": "20 ms", "action": "robot.pedal.button"}\n'
                                '{"at_physical": "20 ms", "stall": "5 ms"}\n')
    result = vision_run(vision, script)
    seen = {}
    for r in reactions(result):
        key = (r.subject, r.tag)
        assert key not in seen
        seen[key] = r.kind


# -- physical actions ----------------------------------------------------------------

def test_physical_tag_rule(compile_text):
    clock = VirtualClock()
    eng = Engine(compile_text(PEDAL), RunConfig(timeout=100 * MSEC), clock=clock)
    eng.start()
    eng.process(*eng.planned())  # startup at (0, 0)
    eng.tag = Tag(30 * MSEC, 0)
    clock.advance_to(42 * MSEC)
    assert eng.inject("main.button") == Tag(42 * MSEC, 0)
    eng.tag = Tag(10 * MSEC, 3)
    eng.queue.current = Tag(10 * MSEC, 3)
    assert eng.inject("main.button", at=10 * MSEC) == Tag(10 * MSEC, 4)


def test_inject_after_shutdown_rejected(compile_text):
    eng = Engine(compile_text(PEDAL), RunConfig(timeout=0))
    result = eng.run()
    assert result.exit_code == 0
    with pytest.raises(ShutdownInProgress):
        eng.inject("main.button")


def test_inject_rejects_logical_and_unknown(compile_text):
    eng = Engine(compile_text("main reactor {\n logical action a\n reaction(a) {= =}\n}"), RunConfig(timeout=0))
    with pytest.raises(ValueError):
        eng.inject("main.a")
    with pytest.raises(KeyError):
        eng.inject("main.nope")


def test_realtime_injection_interrupts_wait(compile_text):
    eng = Engine(compile_text(PEDAL), RunConfig(mode="realtime", timeout=60 * MSEC))
    box = {}

    def press():
        time.sleep(0.015)
        box["tag"] = eng.inject("main.button")

    t = threading.Thread(target=press)
    t.start()
    result = eng.run()
    t.join()
    pressed = reactions(result, "main.reaction1")
    assert len(pressed) == 1 and pressed[0].tag == box["tag"]
    assert 10 * MSEC < box["tag"].time < 30 * MSEC
    order = [r.tag for r in reactions(result)]
    assert order == sorted(order)
    assert result.trace.records.index(pressed[0]) < [
        i for i, r in enumerate(result.trace.records) if r.tag.time == 30 * MSEC][0]


def test_clock_script_parsing():
    entries = parse_clock_script('{"at_physical": "20 ms", "action": "a.b", "value": 3}\n\n'
                                 '{"at_physical": 5, "stall": "1 ms"}\n')
    assert entries == [ScriptEntry(5, stall=MSEC), ScriptEntry(20 * MSEC, "a.b", 3)]
    with pytest.raises(ValueError, match="line 1"):
        parse_clock_script('{"action": "x"}')


# -- faults -----------------------------------------------------------------------

def test_unresolved_extern(compile_text):
    with pytest.raises(RuntimeFault, match="unresolved extern"):
        Engine(compile_text('main reactor {\n reaction(startup) extern "nope"\n}'))


def test_extern_exception_fail_stop(compile_text):
    def boom(ctx):
        raise RuntimeError("kaput")

    text = 'main reactor {\n timer t(0, 1 ms)\n reaction(t) extern "boom"\n}'
    result = run_program(compile_text(text), RunConfig(timeout=10 * MSEC), externs={"boom": boom})
    assert result.exit_code == 2
    assert "kaput" in result.error
    assert len(reactions(result)) == 1
    assert result.trace.records[-1].note.startswith("error: RuntimeError")


def test_sidecar_has_physical_times(vision, tmp_path):
    path = tmp_path / "run.jsonl"
    vision_run(vision, [], trace_path=str(path))
    assert sidecar_path(path).name == "run.phys.jsonl"
    assert sidecar_path(path).read_text().count("\n") > 0
    assert "physical" not in path.read_text() or '"physical"' not in path.read_text()


# -- determinism and level discipline --------------------------------------------------

WIDE = """
main reactor {
  a = new Stage(k = 1)
  b = new Stage(k = 2)
  c = new Stage(k = 3)
  m = new Merge()
  a.y -> m.a
  b.y -> m.b
  c.y -> m.c
  m.out -> a.x after 3 ms
}
reactor Stage(k: int = 1) {
  input x: int
  output y: int
  timer t(0, 5 ms)
  state acc: int = 0
  reaction(t, x) -> y {=
    if present(x) { acc = acc + x }
    acc = acc * 3 + k
    acc = acc % 1000003
    set(y, acc)
  =}
}
reactor Merge {
  input a: int
  input b: int
  input c: int
  output out: int
  reaction(a, b, c) -> out {=
    s = 0
    if present(a) { s = s + a }
    if present(b) { s = s + b }
    if present(c) { s = s + c }
    set(out, s % 97)
  =}
}
"""


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([1, 2, 4, 8]), st.integers(0, 2**31))
def test_determinism_across_workers_and_jitter(workers, seed):
    program = compile_source(WIDE)
    base = run_program(program, RunConfig(timeout=40 * MSEC)).trace.dumps()
    other = run_program(program, RunConfig(timeout=40 * MSEC, workers=workers, jitter_seed=seed)).trace.dumps()
    assert base == other


def test_level_discipline_and_monotone_tags():
    program = compile_source(WIDE)
    result = run_program(program, RunConfig(timeout=40 * MSEC, workers=4, jitter_seed=1))
    recs = reactions(result)
    assert [r.tag for r in recs] == sorted(r.tag for r in recs)
    by_tag = {}
    for i, r in enumerate(recs):
        by_tag.setdefault(r.tag, {})[r.subject] = i
    for u, v in program.graph.edges:
        for seen in by_tag.values():
            if u in seen and v in seen:
                assert seen[u] < seen[v]
