import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcl.compiler import compile_source
from rcl.dsl import ast
from rcl.dsl.checker import validate
from rcl.dsl.elaborate import elaborate
from rcl.dsl.parser import parse
from rcl.dsl.printer import format_program
from rcl.errors import DiagnosticError, ParseError
from rcl.tags import MSEC

PIPE = """
main reactor {
  a = new Src()
  b = new Sink()
  a.y -> b.x
}
reactor Src {
  timer t(0, 10 ms)
  output y: int
  reaction(t) -> y {= set(y, 1) =}
}
reactor Sink {
  input x: int
  reaction(x) {= log(x) =}
}
"""


def errors_of(text):
    with pytest.raises(DiagnosticError) as e:
        compile_source(text, "t.rcl")
    return [d.message for d in e.value.diagnostics]


def test_timer_decl():
    p = parse("reactor R { timer t(0, 30 ms) }")
    (timer,) = p.reactors[0].members
    assert isinstance(timer, ast.TimerDecl)
    assert timer.offset.ns == 0 and timer.period.ns == 30 * MSEC


def test_after_connection():
    p = parse("main reactor { a.y -> b.x after 10 ms }")
    (conn,) = p.reactors[0].members
    assert conn.delay.ns == 10 * MSEC
    assert conn.src.parts == ("a", "y") and conn.dst.parts == ("b", "x")


def test_empty_reactor():
    p = parse("reactor R {}")
    assert p.reactors[0].name == "R" and p.reactors[0].members == ()


def test_syntax_error_has_position_and_expected():
    with pytest.raises(ParseError) as e:
        parse("reactor R {\n  timer t(0 30 ms)\n}", "x.rcl")
    assert (e.value.line, e.value.col) == (2, 13)
    assert "')'" in e.value.expected
    assert str(e.value).startswith("x.rcl:2:13: error:")


def test_vision_validates(programs):
    text = programs["vision_assistant.rcl"].read_text()
    p = parse(text)
    assert validate(p) == []
    kinds = [r.kind for r in p.reactors]
    assert kinds.count("federated") == 1 and kinds.count("reactor") == 6


def test_vision_elaborates(vision):
    ig = vision.ig
    tops = {"robot", "vision"}
    leaves = {"robot.pedal", "robot.stop", "vision.camera", "vision.detect"}
    assert tops | leaves <= set(ig.reactors)
    assert ig.federates == ["robot", "vision"] or set(ig.federates) == tops
    conn = {c.id: c for c in ig.connections}["vision.detect.stop->robot.stop.human"]
    assert conn.delay == 10 * MSEC
    assert conn.stp == 10 * MSEC


def test_single_partition(compile_text):
    ig = compile_text(PIPE).ig
    assert ig.federates == [] or not ig.federates
    assert {c.id for c in ig.connections} == {"a.y->b.x"}


@pytest.mark.parametrize("text,needle", [
    ("main reactor { a = new R() }\nreactor R { reaction(foo) {= =} }", "unresolved trigger 'foo'"),
    ("main reactor { a = new R() b = new R() c = new S()\n a.y -> c.x\n b.y -> c.x }\n"
     "reactor R { output y: int }\nreactor S { input x: int }", "multiple writers"),
    ("main reactor { a = new A() }\nreactor A { b = new A() }", "instantiation cycle: A -> A"),
    ("federated reactor { a = new R() b = new S()\n a.y -> b.x }\nreactor R { output y: int }\n"
     "reactor S { input x: int }", "positive after-delay"),
    ("main reactor { a = new R() }\nreactor R { input x: int\n reaction(x) -> x {= =} }", "direction"),
    ("main reactor { a = new R() }\nreactor R { output y: int\n reaction(y) {= =} }", "direction"),
    ("main reactor { a = new R() }\nreactor R {}\nreactor R {}", "duplicate"),
    ("reactor R {}", "no main"),
    ("main reactor { a = new R() }\nreactor R { input x: int\n reaction(x) {= =} deadline(0) {= =} }", "deadline"),
    ("main reactor { a = new R() b = new S()\n a.y -> b.x }\nreactor R { output y: int }\n"
     "reactor S { input x: string }", "type"),
    ("main reactor { a = new R() }\nreactor R { input x: int\n reaction(x) {= set(x, 1) =} }", "x"),
    ("main reactor { a = new R() }\nreactor R { input x: int\n reaction(x) {= log(nope) =} }", "nope"),
])
def test_checker_errors(text, needle):
    msgs = errors_of(text)
    assert any(needle in m for m in msgs), msgs


def test_pass_through_is_delay_free(vision):
    conns = {c.id: c for c in vision.ig.connections}
    assert conns["robot.pedal.stop->robot.stop.stop"].delay is None


def test_zero_after_delay_bumps_microstep(compile_text):
    p = compile_text(PIPE.replace("a.y -> b.x", "a.y -> b.x after 0"))
    (c,) = p.ig.connections
    assert c.delay == 0


def test_diagnostic_format():
    with pytest.raises(DiagnosticError) as e:
        compile_source("main reactor { a = new Nope() }", "f.rcl")
    line = str(e.value.diagnostics[0])
    file, row, col, rest = line.split(":", 3)
    assert file == "f.rcl" and row.isdigit() and col.isdigit() and rest.startswith(" error:")


# -- parse/print fixed point ----------------------------------------------------

TYPES = ["int", "float", "bool", "string", "void"]
LITERALS = {"int": ["0", "7", "-3"], "float": ["1.5", "0.0"], "bool": ["true", "false"],
            "string": ['"hi"', '"a b"']}


def random_program(seed: int) -> str:
    rng = random.Random(seed)
    out = []
    names = [f"R{i}" for i in range(rng.randint(1, 3))]
    for name in names:
        members, readable, writable = [], [], []
        for i in range(rng.randint(0, 3)):
            t = rng.choice(TYPES)
            members.append(f"input i{i}: {t}")
            readable.append(f"i{i}")
        for i in range(rng.randint(0, 3)):
            members.append(f"output o{i}: {rng.choice(TYPES)}")
            writable.append(f"o{i}")
        if rng.random() < 0.5:
            members.append(f"timer t({rng.choice(['0', '5 ms'])}, {rng.choice(['10 ms', '1 s', '0'])})")
            readable.append("t")
        if rng.random() < 0.5:
            members.append(f"logical action a{rng.choice(['', '(2 ms)'])}")
            readable.append("a")
            writable.append("a")
        for i in range(rng.randint(0, 2)):
            t = rng.choice(list(LITERALS))
            members.append(f"state s{i}: {t} = {rng.choice(LITERALS[t])}")
        for _ in range(rng.randint(0, 2)):
            trig = rng.sample(readable + ["startup"], k=min(len(readable) + 1, rng.randint(1, 2)))
            eff = rng.sample(writable, k=min(len(writable), rng.randint(0, 2)))
            clause = f"reaction({', '.join(trig)})" + (f" -> {', '.join(eff)}" if eff else "")
            body = rng.choice(['{= =}', 'extern "cb"', '{= log("x") =}'])
            if rng.random() < 0.3:
                body += " deadline(3 ms) {= =}"
            members.append(f"{clause} {body}")
        params = rng.choice(["", "(n: int = 2)", "(p: time = 10 ms, q: float = 0.5)"])
        out.append(f"reactor {name}{params} {{\n  " + "\n  ".join(members) + "\n}")
    kids = [f"c{i} = new {rng.choice(names)}()" for i in range(rng.randint(0, 3))]
    out.append(f"{rng.choice(['main', 'federated'])} reactor {{\n  " + "\n  ".join(kids) + "\n}")
    rng.shuffle(out)
    return "target Python\n" + "\n".join(out)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_parse_print_fixed_point(seed):
    first = parse(random_program(seed))
    printed = format_program(first)
    second = parse(printed)
    assert second == first
    assert format_program(second) == printed


def test_vision_print_fixed_point(programs):
    p = parse(programs["vision_assistant.rcl"].read_text())
    assert parse(format_program(p)) == p


BLOCKS = [
    "reactor Src {\n  timer t(0, 10 ms)\n  output y: int\n  reaction(t) -> y {= set(y, 1) =}\n}",
    "reactor Sink {\n  input x: int\n  reaction(x) {= log(x) =}\n}",
]
MAIN_LINES = ["a = new Src()", "b = new Sink()", "a.y -> b.x"]


@settings(max_examples=30, deadline=None)
@given(st.permutations(range(3)), st.permutations(range(3)))
def test_elaboration_ignores_declaration_order(blocks, lines):
    main = "main reactor {\n  " + "\n  ".join(MAIN_LINES[i] for i in lines) + "\n}"
    parts = [main] + BLOCKS
    a = elaborate(parse(PIPE))
    b = elaborate(parse("\n".join(parts[i] for i in blocks)))
    assert set(a.reactors) == set(b.reactors)
    assert {c.id for c in a.connections} == {c.id for c in b.connections}
    assert a.digest() == b.digest()


def test_time_unit_must_share_the_line():
    p = parse("main reactor {\n  a.y -> b.x after 0\n  s.y -> b.z\n}")
    first, second = p.reactors[0].members
    assert first.delay.ns == 0
    assert second.src.parts == ("s", "y")
