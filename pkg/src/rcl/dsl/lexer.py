"""Tokenizer shared by reactor sources and built-in reaction bodies."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import Diagnostic, ParseError

IDENT = "ident"
INT = "int"
FLOAT = "float"
STRING = "string"
CODE = "code"
OP = "op"
EOF = "eof"

# longest first
_OPERATORS = (
    "->", "==", "!=", "<=", ">=", "&&", "||",
    "{", "}", "(", ")", ",", ":", ";", "=", ".", "+", "-", "*", "/", "%",
    "<", ">", "!",
)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\", "0": "\0"}


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    col: int
    # for CODE tokens: position of the first character inside the braces
    body_line: int = 0
    body_col: int = 0

    def describe(self) -> str:
        if self.kind == EOF:
            return "end of input"
        if self.kind == CODE:
            return "code block"
        return repr(self.value)


class Lexer:
    def __init__(self, text: str, filename: str = "<input>", line: int = 1, col: int = 1):
        self.text = text
        self.filename = filename
        self.pos = 0
        self.line = line
        self.col = col

    def error(self, message: str, line: int | None = None, col: int | None = None) -> ParseError:
        return ParseError(Diagnostic(line or self.line, col or self.col, message, file=self.filename))

    def _advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def _peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.text[i] if i < len(self.text) else ""

    def _skip_trivia(self) -> None:
        while self.pos < len(self.text):
            c = self._peek()
            if c in " \t\r\n":
                self._advance()
            elif c == "/" and self._peek(1) == "/":
                while self.pos < len(self.text) and self._peek() != "\n":
                    self._advance()
            elif c == "#":
                while self.pos < len(self.text) and self._peek() != "\n":
                    self._advance()
            elif c == "/" and self._peek(1) == "*":
                line, col = self.line, self.col
                end = self.text.find("*/", self.pos + 2)
                if end < 0:
                    raise self.error("unterminated comment", line, col)
                self._advance(end + 2 - self.pos)
            else:
                return

    def tokens(self) -> list[Token]:
        out = []
        while True:
            tok = self.next()
            out.append(tok)
            if tok.kind == EOF:
                return out

    def next(self) -> Token:
        self._skip_trivia()
        line, col = self.line, self.col
        if self.pos >= len(self.text):
            return Token(EOF, "", line, col)
        c = self._peek()
        if c == "{" and self._peek(1) == "=":
            self._advance(2)
            body_line, body_col = self.line, self.col
            end = self.text.find("=}", self.pos)
            if end < 0:
                raise self.error("unterminated code block '{='", line, col)
            code = self.text[self.pos:end]
            self._advance(end + 2 - self.pos)
            return Token(CODE, code, line, col, body_line, body_col)
        if c.isalpha() or c == "_":
            start = self.pos
            while self._peek().isalnum() or self._peek() == "_":
                self._advance()
            return Token(IDENT, self.text[start:self.pos], line, col)
        if c.isdigit():
            start = self.pos
            while self._peek().isdigit():
                self._advance()
            kind = INT
            if self._peek() == "." and self._peek(1).isdigit():
                kind = FLOAT
                self._advance()
                while self._peek().isdigit():
                    self._advance()
            if self._peek() in ("e", "E") and (
                self._peek(1).isdigit() or (self._peek(1) in "+-" and self._peek(2).isdigit())
            ):
                kind = FLOAT
                self._advance(2)
                while self._peek().isdigit():
                    self._advance()
            return Token(kind, self.text[start:self.pos], line, col)
        if c == '"':
            self._advance()
            chars = []
            while True:
                ch = self._peek()
                if ch == "" or ch == "\n":
                    raise self.error("unterminated string literal", line, col)
                if ch == '"':
                    self._advance()
                    break
                if ch == "\\":
                    esc = self._peek(1)
                    if esc not in _ESCAPES:
                        raise self.error(f"unknown escape '\\{esc}'")
                    chars.append(_ESCAPES[esc])
                    self._advance(2)
                    continue
                chars.append(ch)
                self._advance()
            return Token(STRING, "".join(chars), line, col)
        for op in _OPERATORS:
            if self.text.startswith(op, self.pos):
                self._advance(len(op))
                return Token(OP, op, line, col)
        raise self.error(f"unexpected character {c!r}")


def quote(text: str) -> str:
    out = ['"']
    for ch in text:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\0":
            out.append("\\0")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)
