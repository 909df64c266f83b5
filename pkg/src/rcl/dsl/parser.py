"""Recursive-descent parser for reactor sources (``.rcl``)."""

from __future__ import annotations

from ..errors import Diagnostic, ParseError
from ..tags import UNITS, parse_time
from . import ast
from .lexer import CODE, EOF, FLOAT, IDENT, INT, OP, STRING, Lexer, Token

TYPES = ("void", "bool", "int", "float", "string", "bytes", "time")

_MEMBER_KEYWORDS = {"input", "output", "timer", "logical", "physical", "action", "state", "reaction"}


def normalize_type(name: str) -> str:
    # time-typed parameters and state are integers of nanoseconds
    return "int" if name == "time" else name


class Parser:
    def __init__(self, text: str, filename: str = "<input>"):
        self.filename = filename
        self.toks = Lexer(text, filename).tokens()
        self.i = 0
        self._auto_names: dict[str, int] = {}

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, n: int = 1) -> Token:
        return self.toks[min(self.i + n, len(self.toks) - 1)]

    def loc(self, tok: Token | None = None) -> ast.Loc:
        tok = tok or self.tok
        return ast.Loc(tok.line, tok.col)

    def error(self, expected: tuple[str, ...], tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        want = ", ".join(expected)
        msg = f"expected {want} but found {tok.describe()}"
        return ParseError(Diagnostic(tok.line, tok.col, msg, file=self.filename), expected)

    def at(self, value: str) -> bool:
        t = self.tok
        return (t.kind == OP or t.kind == IDENT) and t.value == value

    def accept(self, value: str) -> bool:
        if self.at(value):
            self.i += 1
            return True
        return False

    def expect(self, value: str) -> Token:
        if not self.at(value):
            raise self.error((repr(value),))
        tok = self.tok
        self.i += 1
        return tok

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != IDENT:
            raise self.error((what,))
        tok = self.tok
        self.i += 1
        return tok

    # -- program ------------------------------------------------------------

    def parse_program(self) -> ast.Program:
        target = None
        if self.at("target"):
            self.i += 1
            target = self.ident("target name").value
            self.accept(";")
        reactors, behaviors = [], []
        while self.tok.kind != EOF:
            if self.at("behavior"):
                behaviors.append(self.parse_behavior())
            elif self.at("reactor") or self.at("main") or self.at("federated"):
                reactors.append(self.parse_reactor())
            else:
                raise self.error(("'reactor'", "'main'", "'federated'", "'behavior'"))
        return ast.Program(target, tuple(reactors), tuple(behaviors))

    def parse_reactor(self) -> ast.ReactorDef:
        start = self.tok
        kind = "reactor"
        if self.accept("main"):
            kind = "main"
        elif self.accept("federated"):
            kind = "federated"
        self.expect("reactor")
        name = ""
        if self.tok.kind == IDENT:
            name = self.ident().value
        elif kind == "reactor":
            raise self.error(("reactor name",))
        params: list[ast.ParamDecl] = []
        if self.accept("("):
            if not self.at(")"):
                params.append(self.parse_param())
                while self.accept(","):
                    params.append(self.parse_param())
            self.expect(")")
        self.expect("{")
        members = []
        while not self.at("}"):
            if self.tok.kind == EOF:
                raise self.error(("'}'",))
            members.append(self.parse_member())
            self.accept(";")
        self.expect("}")
        return ast.ReactorDef(name, kind, tuple(params), tuple(members), self.loc(start))

    def _unit_follows(self, number: Token) -> bool:
        # a unit must sit on the same line as its magnitude, so that
        # `after 0` followed by a line starting with `s.y` is not `0 s`
        t = self.tok
        return t.kind == IDENT and t.value in UNITS and t.line == number.line

    def parse_param(self) -> ast.ParamDecl:
        name_tok = self.ident("parameter name")
        ptype = None
        if self.accept(":"):
            ptype = self.parse_type()
        self.expect("=")
        default = self.parse_literal()
        if ptype is None:
            ptype = _literal_type(default)
        return ast.ParamDecl(name_tok.value, ptype, default, self.loc(name_tok))

    def parse_type(self) -> str:
        tok = self.ident("type")
        if tok.value not in TYPES:
            raise self.error(tuple(TYPES), tok)
        return normalize_type(tok.value)

    def parse_member(self) -> ast.Member:
        tok = self.tok
        loc = self.loc()
        if tok.kind != IDENT:
            raise self.error(("member declaration",))
        v = tok.value
        if v in ("input", "output"):
            self.i += 1
            name = self.ident("port name").value
            ptype = self.parse_type() if self.accept(":") else "void"
            return ast.PortDecl(name, v, ptype, loc)
        if v == "timer":
            self.i += 1
            name = self.ident("timer name").value
            offset = ast.TimeExpr(0)
            period = ast.TimeExpr(0)
            if self.accept("("):
                offset = self.parse_time()
                if self.accept(","):
                    period = self.parse_time()
                self.expect(")")
            return ast.TimerDecl(name, offset, period, loc)
        if v in ("logical", "physical", "action"):
            origin = "logical"
            if v != "action":
                origin = v
                self.i += 1
            self.expect("action")
            name = self.ident("action name").value
            min_delay = None
            if self.accept("("):
                min_delay = self.parse_time()
                self.expect(")")
            atype = self.parse_type() if self.accept(":") else "void"
            return ast.ActionDecl(name, origin, min_delay, atype, loc)
        if v == "state":
            self.i += 1
            name = self.ident("state variable name").value
            stype = self.parse_type() if self.accept(":") else None
            init = None
            if self.accept("="):
                init = self.parse_literal()
            if stype is None:
                if init is None:
                    raise self.error(("':'", "'='"))
                stype = _literal_type(init)
            return ast.StateDecl(name, stype, init, loc)
        if v == "reaction":
            return self.parse_reaction()
        if self.peek().kind == OP and self.peek().value == "=":
            return self.parse_instantiation()
        return self.parse_connection()

    def parse_instantiation(self) -> ast.Instantiation:
        loc = self.loc()
        name = self.ident("instance name").value
        self.expect("=")
        self.expect("new")
        cls = self.ident("reactor class").value
        args = []
        self.expect("(")
        if not self.at(")"):
            args.append(self.parse_arg())
            while self.accept(","):
                args.append(self.parse_arg())
        self.expect(")")
        return ast.Instantiation(name, cls, tuple(args), loc)

    def parse_arg(self):
        name = self.ident("parameter name").value
        self.expect("=")
        if self.tok.kind == IDENT and self.tok.value not in ("true", "false"):
            tok = self.ident()
            return name, ast.ParamRef(tok.value, self.loc(tok))
        return name, self.parse_literal()

    def parse_ref(self) -> ast.PortRef:
        loc = self.loc()
        parts = [self.ident("port or trigger name").value]
        while self.accept("."):
            parts.append(self.ident("port name").value)
        return ast.PortRef(tuple(parts), loc)

    def parse_connection(self) -> ast.ConnectionDecl:
        loc = self.loc()
        if self.tok.value in _MEMBER_KEYWORDS:
            raise self.error(("member declaration",))
        src = self.parse_ref()
        if not self.at("->"):
            raise self.error(("'->'", "'='"))
        self.i += 1
        dst = self.parse_ref()
        delay = None
        if self.accept("after"):
            delay = self.parse_time()
        return ast.ConnectionDecl(src, dst, delay, loc)

    def parse_reaction(self) -> ast.ReactionDecl:
        loc = self.loc()
        self.expect("reaction")
        self.expect("(")
        triggers = []
        if not self.at(")"):
            triggers.append(self.parse_ref())
            while self.accept(","):
                triggers.append(self.parse_ref())
        self.expect(")")
        sources = []
        if self.tok.kind == IDENT and self.tok.value != "extern":
            sources.append(self.parse_ref())
            while self.accept(","):
                sources.append(self.parse_ref())
        effects = []
        if self.accept("->"):
            effects.append(self.parse_ref())
            while self.accept(","):
                effects.append(self.parse_ref())
        body = self.parse_body()
        deadline = stp = None
        while self.at("deadline") or self.at("stp"):
            htok = self.tok
            self.i += 1
            self.expect("(")
            bound = self.parse_time()
            self.expect(")")
            handler = ast.Handler(bound, self.parse_body(), self.loc(htok))
            if htok.value == "deadline":
                if deadline is not None:
                    raise ParseError(Diagnostic(htok.line, htok.col, "duplicate deadline clause", file=self.filename))
                deadline = handler
            else:
                if stp is not None:
                    raise ParseError(Diagnostic(htok.line, htok.col, "duplicate stp clause", file=self.filename))
                stp = handler
        return ast.ReactionDecl(tuple(triggers), tuple(sources), tuple(effects), body, deadline, stp, None, loc)

    def parse_body(self) -> ast.Body:
        tok = self.tok
        if tok.kind == CODE:
            self.i += 1
            return ast.Body("script", tok.value, ast.Loc(tok.body_line, tok.body_col))
        if self.at("extern"):
            self.i += 1
            if self.tok.kind != STRING:
                raise self.error(("callback name string",))
            name = self.tok.value
            self.i += 1
            return ast.Body("extern", name, self.loc(tok))
        raise self.error(("'{='", "'extern'"))

    def parse_time(self) -> ast.TimeExpr:
        tok = self.tok
        loc = self.loc()
        if tok.kind == INT:
            self.i += 1
            if self._unit_follows(tok):
                unit = self.tok.value
                self.i += 1
                return ast.TimeExpr(parse_time(f"{tok.value} {unit}"), None, loc)
            if int(tok.value) != 0:
                raise self.error(("time unit",))
            return ast.TimeExpr(0, None, loc)
        if tok.kind == IDENT:
            self.i += 1
            return ast.TimeExpr(None, tok.value, loc)
        raise self.error(("time value",))

    def parse_literal(self) -> ast.Literal:
        tok = self.tok
        loc = self.loc()
        negative = False
        if self.at("-"):
            negative = True
            self.i += 1
            tok = self.tok
        if tok.kind == INT:
            self.i += 1
            if self._unit_follows(tok):
                unit = self.tok.value
                self.i += 1
                ns = parse_time(f"{tok.value} {unit}")
                return ast.Literal(-ns if negative else ns, True, loc)
            v = int(tok.value)
            return ast.Literal(-v if negative else v, False, loc)
        if tok.kind == FLOAT:
            self.i += 1
            v = float(tok.value)
            return ast.Literal(-v if negative else v, False, loc)
        if negative:
            raise self.error(("number",))
        if tok.kind == STRING:
            self.i += 1
            return ast.Literal(tok.value, False, loc)
        if tok.kind == IDENT and tok.value in ("true", "false"):
            self.i += 1
            return ast.Literal(tok.value == "true", False, loc)
        raise self.error(("literal",))

    # -- behavior trees -----------------------------------------------------

    def parse_behavior(self) -> ast.BehaviorDef:
        loc = self.loc()
        self.expect("behavior")
        name = self.ident("behavior name").value
        self._auto_names = {}
        self.expect("{")
        nodes, wires = self._bt_items()
        self.expect("}")
        if len(nodes) > 1:
            n = nodes[1]
            raise ParseError(Diagnostic(n.loc.line, n.loc.col,
                                        "a behavior has exactly one root node", file=self.filename))
        root = nodes[0] if nodes else None
        return ast.BehaviorDef(name, root, tuple(wires), loc)

    def _bt_items(self):
        nodes, wires = [], []
        while not self.at("}"):
            if self.tok.kind == EOF:
                raise self.error(("'}'",))
            if self.at("wire"):
                loc = self.loc()
                self.i += 1
                src = self.parse_ref()
                self.expect("->")
                dst = self.parse_ref()
                wires.append(ast.WireDecl(src, dst, loc))
            else:
                node, inner = self.parse_bt_node()
                nodes.append(node)
                wires.extend(inner)
            self.accept(";")
        return nodes, wires

    def parse_bt_node(self):
        loc = self.loc()
        tok = self.tok
        if self.at("sequence") or self.at("fallback"):
            kind = tok.value
            self.i += 1
            if self.tok.kind == IDENT:
                name = self.ident().value
            else:
                n = self._auto_names.get(kind, 0) + 1
                self._auto_names[kind] = n
                name = f"{kind}{n}"
            self.expect("{")
            children, wires = self._bt_items()
            self.expect("}")
            return ast.BtNodeDecl(kind, name, tuple(children), (), None, loc), wires
        if self.at("action") or self.at("condition"):
            kind = tok.value
            self.i += 1
            name = self.ident("node name").value
            ports = []
            if self.accept("("):
                if not self.at(")"):
                    ports.append(self.parse_bt_port())
                    while self.accept(","):
                        ports.append(self.parse_bt_port())
                self.expect(")")
            self.expect("=")
            body = self.parse_body()
            return ast.BtNodeDecl(kind, name, (), tuple(ports), body, loc), []
        raise self.error(("'sequence'", "'fallback'", "'action'", "'condition'", "'wire'"))

    def parse_bt_port(self) -> ast.BtPortDecl:
        loc = self.loc()
        if not (self.at("in") or self.at("out")):
            raise self.error(("'in'", "'out'"))
        direction = self.tok.value
        self.i += 1
        name = self.ident("port name").value
        ptype = self.parse_type() if self.accept(":") else "void"
        return ast.BtPortDecl(direction, name, ptype, loc)


def _literal_type(lit: ast.Literal) -> str:
    v = lit.value
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, int):
        return "int"
    if isinstance(v, float):
        return "float"
    return "string"


def parse(source: str, filename: str = "<input>") -> ast.Program:
    """Parse reactor source text into an :class:`ast.Program`."""
    return Parser(source, filename).parse_program()
