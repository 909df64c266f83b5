"""Built-in reaction body scripts.

A small imperative language run inside ``{= ... =}`` blocks::

    count = count + 1
    if count % 3 == 0 { set(out, count) } else { log("skip", count) }
    schedule(retry, 5 ms, count)

Integer arithmetic is checked 64-bit; ``/`` and ``%`` on integers truncate
toward zero like C.  Reading an absent trigger is an error; test with
``present(x)`` first.  Scripts are compiled once into Python closures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from ..errors import BodyError, Diagnostic, ParseError
from ..tags import UNITS, parse_time
from ..values import ABSENT, check_int, render
from .lexer import EOF, FLOAT, IDENT, INT, OP, STRING, Lexer, Token

STATUS_WORDS = {"success": "success", "failure": "failure", "running": "running"}
_KEYWORDS = {"if", "else", "return", "true", "false", "and", "or", "not"} | set(STATUS_WORDS)
_STATEMENT_CALLS = {"set", "schedule", "log", "request_stop"}
_FUNCTIONS = {"present", "abs", "min", "max", "int", "float", "str", "time", "microstep"}


class ScriptError(BodyError):
    pass


# -- syntax tree ------------------------------------------------------------

@dataclass
class Node:
    line: int = field(default=0, kw_only=True)
    col: int = field(default=0, kw_only=True)


@dataclass
class Const(Node):
    value: Any


@dataclass
class Name(Node):
    name: str


@dataclass
class Unary(Node):
    op: str
    operand: Node


@dataclass
class Binary(Node):
    op: str
    left: Node
    right: Node


@dataclass
class Call(Node):
    func: str
    args: list


@dataclass
class Assign(Node):
    name: str
    value: Node


@dataclass
class If(Node):
    cond: Node
    then: list
    orelse: list


@dataclass
class Return(Node):
    value: Optional[Node]


@dataclass
class Script:
    statements: list
    text: str = ""


# -- parser -------------------------------------------------------------------

class _ScriptParser:
    def __init__(self, text: str, filename: str, line: int, col: int):
        self.filename = filename
        self.toks = Lexer(text, filename, line, col).tokens()
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, expected: tuple[str, ...]) -> ParseError:
        t = self.tok
        return ParseError(Diagnostic(t.line, t.col, f"expected {', '.join(expected)} but found {t.describe()}",
                                     file=self.filename), expected)

    def at(self, v: str) -> bool:
        return self.tok.kind in (OP, IDENT) and self.tok.value == v

    def accept(self, v: str) -> bool:
        if self.at(v):
            self.i += 1
            return True
        return False

    def expect(self, v: str) -> Token:
        if not self.at(v):
            raise self.error((repr(v),))
        t = self.tok
        self.i += 1
        return t

    def block_until(self, end: str | None) -> list:
        out = []
        while True:
            while self.accept(";"):
                pass
            if end is None and self.tok.kind == EOF:
                return out
            if end is not None and self.at(end):
                return out
            if self.tok.kind == EOF:
                raise self.error((repr(end),))
            out.append(self.statement())

    def statement(self) -> Node:
        t = self.tok
        pos = dict(line=t.line, col=t.col)
        if self.accept("if"):
            return self._if(pos)
        if self.accept("return"):
            if self.at(";") or self.at("}") or self.tok.kind == EOF:
                return Return(None, **pos)
            return Return(self.expr(), **pos)
        if t.kind == IDENT and t.value not in _KEYWORDS:
            nxt = self.toks[self.i + 1]
            if nxt.kind == OP and nxt.value == "=":
                self.i += 2
                return Assign(t.value, self.expr(), **pos)
            if t.value in _STATEMENT_CALLS and nxt.kind == OP and nxt.value == "(":
                return self.postfix_call()
        raise self.error(("statement",))

    def _if(self, pos) -> If:
        cond = self.expr()
        self.expect("{")
        then = self.block_until("}")
        self.expect("}")
        orelse = []
        if self.accept("else"):
            if self.at("if"):
                t = self.tok
                self.i += 1
                orelse = [self._if(dict(line=t.line, col=t.col))]
            else:
                self.expect("{")
                orelse = self.block_until("}")
                self.expect("}")
        return If(cond, then, orelse, **pos)

    def postfix_call(self) -> Call:
        t = self.tok
        self.i += 1
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.expr())
            while self.accept(","):
                args.append(self.expr())
        self.expect(")")
        return Call(t.value, args, line=t.line, col=t.col)

    # precedence climbing: or < and < not < comparison < additive < multiplicative < unary
    def expr(self) -> Node:
        left = self.and_expr()
        while self.at("or") or self.at("||"):
            t = self.tok
            self.i += 1
            left = Binary("or", left, self.and_expr(), line=t.line, col=t.col)
        return left

    def and_expr(self) -> Node:
        left = self.not_expr()
        while self.at("and") or self.at("&&"):
            t = self.tok
            self.i += 1
            left = Binary("and", left, self.not_expr(), line=t.line, col=t.col)
        return left

    def not_expr(self) -> Node:
        if self.at("not") or self.at("!"):
            t = self.tok
            self.i += 1
            return Unary("not", self.not_expr(), line=t.line, col=t.col)
        return self.comparison()

    def comparison(self) -> Node:
        left = self.additive()
        for op in ("==", "!=", "<=", ">=", "<", ">"):
            if self.at(op):
                t = self.tok
                self.i += 1
                return Binary(op, left, self.additive(), line=t.line, col=t.col)
        return left

    def additive(self) -> Node:
        left = self.term()
        while self.at("+") or self.at("-"):
            t = self.tok
            self.i += 1
            left = Binary(t.value, left, self.term(), line=t.line, col=t.col)
        return left

    def term(self) -> Node:
        left = self.unary()
        while self.at("*") or self.at("/") or self.at("%"):
            t = self.tok
            self.i += 1
            left = Binary(t.value, left, self.unary(), line=t.line, col=t.col)
        return left

    def unary(self) -> Node:
        if self.at("-"):
            t = self.tok
            self.i += 1
            return Unary("-", self.unary(), line=t.line, col=t.col)
        return self.primary()

    def primary(self) -> Node:
        t = self.tok
        pos = dict(line=t.line, col=t.col)
        if t.kind == INT:
            self.i += 1
            if self.tok.kind == IDENT and self.tok.value in UNITS and self.tok.line == t.line:
                unit = self.tok.value
                self.i += 1
                return Const(parse_time(f"{t.value} {unit}"), **pos)
            return Const(int(t.value), **pos)
        if t.kind == FLOAT:
            self.i += 1
            return Const(float(t.value), **pos)
        if t.kind == STRING:
            self.i += 1
            return Const(t.value, **pos)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == IDENT:
            if t.value in ("true", "false"):
                self.i += 1
                return Const(t.value == "true", **pos)
            if t.value in STATUS_WORDS:
                self.i += 1
                return Const(STATUS_WORDS[t.value], **pos)
            if t.value in _KEYWORDS:
                raise self.error(("expression",))
            nxt = self.toks[self.i + 1]
            if nxt.kind == OP and nxt.value == "(":
                return self.postfix_call()
            self.i += 1
            name = t.value
            while self.at(".") and self.toks[self.i + 1].kind == IDENT:
                self.i += 1
                name += "." + self.tok.value
                self.i += 1
            return Name(name, **pos)
        raise self.error(("expression",))


def parse_script(text: str, filename: str = "<input>", line: int = 1, col: int = 1) -> Script:
    p = _ScriptParser(text, filename, line, col)
    stmts = p.block_until(None)
    return Script(stmts, text)


# -- static checks ------------------------------------------------------------

@dataclass
class Scope:
    """Names visible to one reaction body."""
    readable: set  # trigger and source local names
    ports: set  # effect ports that may be set
    actions: set  # effect actions that may be scheduled
    state: set
    params: set


def check_script(script: Script, scope: Scope, filename: str = "<input>") -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    assigned: set = set()

    def diag(node: Node, msg: str) -> None:
        diags.append(Diagnostic(node.line, node.col, msg, file=filename))

    def collect(stmts):
        for s in stmts:
            if isinstance(s, Assign):
                assigned.add(s.name)
            elif isinstance(s, If):
                collect(s.then)
                collect(s.orelse)

    collect(script.statements)

    def visible(name: str) -> bool:
        return (name in scope.readable or name in scope.state or name in scope.params
                or name in assigned)

    def expr(e: Node) -> None:
        if isinstance(e, Name):
            if not visible(e.name):
                if e.name in scope.ports or e.name in scope.actions:
                    diag(e, f"'{e.name}' is an effect and cannot be read; list it as a trigger or source")
                else:
                    diag(e, f"unresolved name '{e.name}'")
        elif isinstance(e, Unary):
            expr(e.operand)
        elif isinstance(e, Binary):
            expr(e.left)
            expr(e.right)
        elif isinstance(e, Call):
            if e.func not in _FUNCTIONS:
                diag(e, f"unknown function '{e.func}'")
                return
            if e.func == "present":
                if len(e.args) != 1 or not isinstance(e.args[0], Name):
                    diag(e, "present() takes one trigger or source name")
                elif e.args[0].name not in scope.readable:
                    diag(e.args[0], f"'{e.args[0].name}' is not a trigger or source of this reaction")
                return
            for a in e.args:
                expr(a)

    def stmts(body):
        for s in body:
            if isinstance(s, Assign):
                if s.name in scope.params:
                    diag(s, f"cannot assign to parameter '{s.name}'")
                elif s.name in scope.readable or s.name in scope.ports or s.name in scope.actions:
                    diag(s, f"cannot assign to port or trigger '{s.name}'; use set()")
                elif "." in s.name:
                    diag(s, f"cannot assign to '{s.name}'")
                expr(s.value)
            elif isinstance(s, If):
                expr(s.cond)
                stmts(s.then)
                stmts(s.orelse)
            elif isinstance(s, Return):
                if s.value is not None:
                    expr(s.value)
            elif isinstance(s, Call):
                _check_call(s, scope, diag, expr)

    stmts(script.statements)
    return diags


def _check_call(s: Call, scope: Scope, diag, expr) -> None:
    if s.func == "set":
        if not (1 <= len(s.args) <= 2) or not isinstance(s.args[0], Name):
            diag(s, "set() takes a port name and an optional value")
            return
        if s.args[0].name not in scope.ports:
            diag(s.args[0], f"'{s.args[0].name}' is not an effect port of this reaction")
        for a in s.args[1:]:
            expr(a)
    elif s.func == "schedule":
        if not (1 <= len(s.args) <= 3) or not isinstance(s.args[0], Name):
            diag(s, "schedule() takes an action name, an optional delay and an optional value")
            return
        if s.args[0].name not in scope.actions:
            diag(s.args[0], f"'{s.args[0].name}' is not an effect action of this reaction")
        for a in s.args[1:]:
            expr(a)
    elif s.func == "log":
        for a in s.args:
            expr(a)
    elif s.func == "request_stop":
        if s.args:
            diag(s, "request_stop() takes no arguments")


# -- compilation --------------------------------------------------------------

class _Return(Exception):
    def __init__(self, value):
        self.value = value


def _fail(node: Node, msg: str) -> ScriptError:
    return ScriptError(f"line {node.line}:{node.col}: {msg}")


def _num(node: Node, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _fail(node, f"expected a number, got {render(v)!r}")
    return v


def _int_result(node: Node, v: int) -> int:
    try:
        return check_int(v)
    except Exception:
        raise _fail(node, f"integer overflow ({v})") from None


def _arith(node: Binary, op: str, a, b):
    if op == "+" and isinstance(a, str) and isinstance(b, str):
        return a + b
    a = _num(node.left, a)
    b = _num(node.right, b)
    both_int = isinstance(a, int) and isinstance(b, int)
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    elif op in ("/", "%"):
        if b == 0:
            raise _fail(node, "division by zero")
        if both_int:
            q = abs(a) // abs(b)
            if (a < 0) != (b < 0):
                q = -q
            r = q if op == "/" else a - q * b
        else:
            r = a / b if op == "/" else _fmod(a, b)
    else:  # pragma: no cover
        raise _fail(node, f"unknown operator {op}")
    return _int_result(node, r) if both_int else float(r)


def _fmod(a: float, b: float) -> float:
    import math
    return math.fmod(a, b)


def _compare(node: Binary, op: str, a, b) -> bool:
    if op in ("==", "!="):
        if isinstance(a, bool) != isinstance(b, bool):
            eq = False
        else:
            eq = a == b
        return eq if op == "==" else not eq
    if isinstance(a, str) and isinstance(b, str):
        pass
    else:
        a = _num(node.left, a)
        b = _num(node.right, b)
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _truth(node: Node, v) -> bool:
    if not isinstance(v, bool):
        raise _fail(node, f"condition must be a bool, got {render(v)!r}")
    return v


class _Env:
    __slots__ = ("ctx", "locals")

    def __init__(self, ctx):
        self.ctx = ctx
        self.locals = {}


def _compile_expr(e: Node, state: set, params: set) -> Callable:
    if isinstance(e, Const):
        v = e.value
        return lambda env: v
    if isinstance(e, Name):
        name = e.name

        def read(env):
            if name in env.locals:
                return env.locals[name]
            ctx = env.ctx
            if name in state:
                return ctx.state[name]
            if name in params:
                return ctx.params[name]
            v = ctx.read(name)
            if v is ABSENT:
                raise _fail(e, f"'{name}' is absent")
            return v
        return read
    if isinstance(e, Unary):
        inner = _compile_expr(e.operand, state, params)
        if e.op == "not":
            return lambda env: not _truth(e.operand, inner(env))

        def neg(env):
            v = _num(e.operand, inner(env))
            return _int_result(e, -v) if isinstance(v, int) else -v
        return neg
    if isinstance(e, Binary):
        left = _compile_expr(e.left, state, params)
        right = _compile_expr(e.right, state, params)
        op = e.op
        if op == "and":
            return lambda env: _truth(e.left, left(env)) and _truth(e.right, right(env))
        if op == "or":
            return lambda env: _truth(e.left, left(env)) or _truth(e.right, right(env))
        if op in ("==", "!=", "<", "<=", ">", ">="):
            return lambda env: _compare(e, op, left(env), right(env))
        return lambda env: _arith(e, op, left(env), right(env))
    if isinstance(e, Call):
        return _compile_function(e, state, params)
    raise TypeError(f"unexpected node {e!r}")  # pragma: no cover


def _compile_function(e: Call, state: set, params: set) -> Callable:
    f = e.func
    if f == "present":
        name = e.args[0].name
        return lambda env: env.ctx.read(name) is not ABSENT
    if f == "time":
        return lambda env: env.ctx.tag.time
    if f == "microstep":
        return lambda env: env.ctx.tag.microstep
    args = [_compile_expr(a, state, params) for a in e.args]

    def values(env):
        return [a(env) for a in args]

    if f == "abs":
        def _abs(env):
            (v,) = values(env)
            v = _num(e, v)
            return _int_result(e, abs(v)) if isinstance(v, int) else abs(v)
        return _abs
    if f in ("min", "max"):
        pick = min if f == "min" else max

        def _minmax(env):
            vs = [_num(e, v) for v in values(env)]
            if not vs:
                raise _fail(e, f"{f}() needs arguments")
            return pick(vs)
        return _minmax
    if f == "int":
        def _int(env):
            (v,) = values(env)
            if isinstance(v, float):
                return _int_result(e, int(v))
            return _int_result(e, int(_num(e, v)))
        return _int
    if f == "float":
        return lambda env: float(_num(e, values(env)[0]))
    if f == "str":
        return lambda env: render(values(env)[0])
    raise _fail(e, f"unknown function '{f}'")


def _compile_block(stmts: list, state: set, params: set) -> Callable:
    compiled = [_compile_stmt(s, state, params) for s in stmts]

    def run(env):
        for c in compiled:
            c(env)
    return run


def _compile_stmt(s: Node, state: set, params: set) -> Callable:
    if isinstance(s, Assign):
        value = _compile_expr(s.value, state, params)
        name = s.name
        if name in state:
            def assign_state(env):
                env.ctx.state[name] = value(env)
            return assign_state

        def assign_local(env):
            env.locals[name] = value(env)
        return assign_local
    if isinstance(s, If):
        cond = _compile_expr(s.cond, state, params)
        then = _compile_block(s.then, state, params)
        orelse = _compile_block(s.orelse, state, params)

        def branch(env):
            if _truth(s.cond, cond(env)):
                then(env)
            else:
                orelse(env)
        return branch
    if isinstance(s, Return):
        value = _compile_expr(s.value, state, params) if s.value is not None else (lambda env: None)

        def ret(env):
            raise _Return(value(env))
        return ret
    if isinstance(s, Call):
        args = [_compile_expr(a, state, params) for a in s.args[1:]] if s.func in ("set", "schedule") else \
            [_compile_expr(a, state, params) for a in s.args]
        if s.func == "set":
            port = s.args[0].name

            def do_set(env):
                env.ctx.set(port, args[0](env) if args else None)
            return do_set
        if s.func == "schedule":
            action = s.args[0].name

            def do_schedule(env):
                delay = _num(s, args[0](env)) if args else 0
                if not isinstance(delay, int) or delay < 0:
                    raise _fail(s, f"schedule delay must be a non-negative integer of ns, got {delay!r}")
                value = args[1](env) if len(args) > 1 else None
                env.ctx.schedule(action, delay, value)
            return do_schedule
        if s.func == "log":
            return lambda env: env.ctx.log(" ".join(render(a(env)) for a in args))
        if s.func == "request_stop":
            return lambda env: env.ctx.request_stop()
        return lambda env: _compile_function(s, state, params)(env)
    raise TypeError(f"unexpected statement {s!r}")  # pragma: no cover


def compile_script(script: Script, state: set, params: set) -> Callable:
    """Return ``body(ctx) -> return value`` for a checked script."""
    block = _compile_block(script.statements, state, params)

    def body(ctx):
        env = _Env(ctx)
        try:
            block(env)
        except _Return as r:
            return r.value
        except RecursionError:  # pragma: no cover
            raise ScriptError("script nesting too deep") from None
        return None
    return body
