import random

from hypothesis import given, settings
from hypothesis import strategies as st

from rcl.compiler import compile_source
from rcl.runtime.clock import MonotonicClock
from rcl.runtime.engine import RunConfig, run_program
from rcl.tags import MSEC, Tag
from rcl.trace import MARKER_LEVEL, Trace, TraceRecord, canonicalize, compare, make_header

HEADER = make_header("abc", 100, "fast")

records = st.builds(
    TraceRecord,
    st.builds(Tag, st.integers(0, 50), st.integers(0, 3)),
    st.integers(0, 4),
    st.sampled_from(["reaction", "deadline_handler", "stp_fault"]),
    st.sampled_from(["a.reaction1", "b.reaction1", "c.reaction2"]),
    st.dictionaries(st.sampled_from(["a.x", "b.x"]), st.one_of(st.none(), st.integers(-2**63, 2**63 - 1), st.floats())),
    st.dictionaries(st.sampled_from(["a.y", "b.y"]), st.one_of(st.none(), st.integers(-2**63, 2**63 - 1), st.text(max_size=3))),
    st.one_of(st.none(), st.text(max_size=5)),
)


@given(st.lists(records, max_size=20))
def test_canonicalize_idempotent(recs):
    once = canonicalize(HEADER, recs)
    assert canonicalize(once.header, once.records).dumps() == once.dumps()


# a run records at most one record per (tag, subject)
unique_records = st.lists(records, max_size=20, unique_by=lambda r: (r.tag, r.subject))


@given(unique_records, st.randoms())
def test_order_of_logging_is_irrelevant(recs, rnd):
    shuffled = recs[:]
    rnd.shuffle(shuffled)
    assert canonicalize(HEADER, recs).dumps() == canonicalize(HEADER, shuffled).dumps()


@given(st.lists(records, max_size=20))
def test_serialization_roundtrip(recs):
    t = canonicalize(HEADER, recs)
    assert Trace.loads(t.dumps()).dumps() == t.dumps()


@settings(max_examples=50)
@given(st.lists(records, max_size=8), st.lists(records, max_size=8))
def test_compare_reflexive_and_symmetric(a, b):
    ta, tb = canonicalize(HEADER, a), canonicalize(HEADER, b)
    assert compare(ta, ta) is None
    assert (compare(ta, tb) is None) == (compare(tb, ta) is None)
    if compare(ta, tb) is None:
        assert ta.dumps() == tb.dumps()


def test_divergence_pinpoints_field():
    recs = [TraceRecord(Tag(0, 0), 0, "reaction", "a.reaction1", {}, {"a.y": 1}),
            TraceRecord(Tag(1, 0), 0, "reaction", "a.reaction1", {}, {"a.y": 2})]
    other = [recs[0], TraceRecord(Tag(1, 0), 0, "reaction", "a.reaction1", {}, {"a.y": 3})]
    d = compare(canonicalize(HEADER, recs), canonicalize(HEADER, other))
    assert (d.kind, d.index, d.field) == ("record", 1, "outputs")
    assert "2" in d.golden and "3" in d.candidate


def test_length_and_header_divergence():
    recs = [TraceRecord(Tag(0, 0), MARKER_LEVEL, "startup", "")]
    d = compare(canonicalize(HEADER, recs), canonicalize(HEADER, []))
    assert d.kind == "length"
    d = compare(canonicalize(HEADER, recs), canonicalize(make_header("zzz", 100, "fast"), recs))
    assert d.kind == "header" and d.field == "program"
    # mode and timeout are informational only
    assert compare(canonicalize(HEADER, recs), canonicalize(make_header("abc", 5, "realtime"), recs)) is None


def test_floats_are_bit_exact():
    r = TraceRecord(Tag(0, 0), 0, "reaction", "a.reaction1", {}, {"a.y": 0.1 + 0.2})
    line = canonicalize(HEADER, [r]).dumps()
    back = Trace.loads(line).records[0]
    assert back.outputs["a.y"] == 0.1 + 0.2
    assert "3fd3333333333334" in line


def test_empty_run_trace():
    result = run_program(compile_source("main reactor {}"), RunConfig())
    lines = result.trace.dumps().splitlines()
    assert len(lines) == 3
    assert '"startup"' in lines[1] and '"shutdown"' in lines[2]


def test_realtime_equals_fast():
    text = """
main reactor {
  timer t(0, 5 ms)
  state n: int = 0
  reaction(t) {= n = n + 1
  log(n) =}
}
"""
    program = compile_source(text)
    fast = run_program(program, RunConfig(timeout=20 * MSEC))
    real = run_program(program, RunConfig(mode="realtime", timeout=20 * MSEC), clock=MonotonicClock())
    assert compare(fast.trace, real.trace) is None


def test_program_hash_ignores_formatting():
    a = compile_source("main reactor {\n timer t(0, 5 ms)\n reaction(t) {= log(1) =}\n}")
    b = compile_source("// comment\nmain   reactor {\n\n  timer t(0,5 ms)\n  reaction(t) {= log(1) =}\n}")
    c = compile_source("main reactor {\n timer t(0, 6 ms)\n reaction(t) {= log(1) =}\n}")
    assert a.digest == b.digest != c.digest


def test_worker_counts_give_equal_traces(vision):
    rng = random.Random(3)
    base = run_program(vision, RunConfig(timeout=100 * MSEC)).trace
    for w in (2, 4, 8):
        t = run_program(vision, RunConfig(timeout=100 * MSEC, workers=w, jitter_seed=rng.randint(0, 99))).trace
        assert compare(base, t) is None
