import pytest

from rcl.compiler import compile_source
from rcl.dsl.script import Scope, check_script, parse_script
from rcl.errors import DiagnosticError
from rcl.runtime.engine import RunConfig, run_program
from rcl.tags import MSEC


def run_body(body: str, extra: str = "", timeout=0):
    text = f"""
main reactor {{
  state n: int = 7
  state f: float = 0.5
  {extra}
  reaction(startup) {{= {body} =}}
}}
"""
    result = run_program(compile_source(text), RunConfig(timeout=timeout))
    recs = [r for r in result.trace.records if r.subject == "main.reaction1"]
    return result, recs[0].note if recs else None


@pytest.mark.parametrize("body,note", [
    ('log(7 / 2, -7 / 2, 7 % 3, -7 % 3)', "3 -3 1 -1"),
    ('log(1 + 2 * 3, (1 + 2) * 3)', "7 9"),
    ('log(n * f, 3 / 2.0)', "3.5 1.5"),
    ('log(min(3, 1, 2), max(1, 4), abs(-5))', "1 4 5"),
    ('log(int(2.9), float(2), str(12) + "!")', "2 2.0 12!"),
    ('if n > 5 and not (n == 6) { log("big") } else { log("small") }', "big"),
    ('n = n + 1\nlog(n)', "8"),
    ('log(time(), microstep())', "0 0"),
    ('x = 3\nif x >= 3 { x = x * 2 }\nlog(x)', "6"),
    ('log(true or false, 1 != 2, "a" < "b")', "true true true"),
])
def test_evaluation(body, note):
    result, got = run_body(body)
    assert result.exit_code == 0, result.error
    assert got == note


@pytest.mark.parametrize("body,needle", [
    ("n = 9223372036854775807\nn = n + 1", "overflow"),
    ("log(1 / 0)", "zero"),
    ('if 1 { log("x") }', "bool"),
    ('log(1 + "a")', ""),
])
def test_runtime_errors_fail_stop(body, needle):
    result, note = run_body(body)
    assert result.exit_code == 2
    assert note.startswith("error:") and needle in note


def test_absent_read_is_error():
    text = """
main reactor {
  logical action a: int
  timer t(0)
  reaction(startup, t) -> a {= log(a) =}
}
"""
    with pytest.raises(DiagnosticError):
        compile_source(text)


def test_present_and_absent():
    text = """
main reactor {
  logical action a: int
  reaction(startup) -> a {= schedule(a, 2 ms, 41) =}
  reaction(startup, a) {=
    if present(a) { log("got", a + 1) } else { log("nothing") }
  =}
}
"""
    result = run_program(compile_source(text), RunConfig(timeout=5 * MSEC))
    notes = [(r.tag.time, r.note) for r in result.trace.records if r.subject == "main.reaction2"]
    assert notes == [(0, "nothing"), (2 * MSEC, "got 42")]


def test_request_stop_ends_at_next_microstep():
    text = """
main reactor {
  timer t(0, 1 ms)
  state k: int = 0
  reaction(t) {=
    k = k + 1
    if k == 3 { request_stop() }
  =}
}
"""
    result = run_program(compile_source(text), RunConfig(timeout=100 * MSEC))
    last = result.trace.records[-1]
    assert last.kind == "shutdown"
    assert (last.tag.time, last.tag.microstep) == (2 * MSEC, 1)


def test_static_checks():
    scope = Scope(readable={"x"}, ports={"y"}, actions=set(), state={"s"}, params={"p"})
    ok = parse_script("s = s + x\nset(y, s)")
    assert check_script(ok, scope) == []
    for text, needle in [("set(x, 1)", "x"), ("p = 1", "p"), ("log(zz)", "zz"), ("log(frob(1))", "frob")]:
        diags = check_script(parse_script(text), scope)
        assert diags and any(needle in d.message for d in diags), (text, diags)


def test_script_syntax_error_position():
    with pytest.raises(DiagnosticError) as e:
        compile_source("main reactor {\n  reaction(startup) {=\n    log(1 +)\n  =}\n}", "s.rcl")
    d = e.value.diagnostics[0]
    assert d.line == 3


def test_unit_must_share_the_line(compile_text):
    from rcl.runtime.engine import RunConfig, run_program
    text = 'main reactor {\n state s: int = 0\n reaction(startup) {=\n  x = 0\n  s = 5\n  log(x + s)\n =}\n}'
    result = run_program(compile_text(text), RunConfig(timeout=0))
    assert [r.note for r in result.trace.records if r.kind == "reaction"] == ["5"]
