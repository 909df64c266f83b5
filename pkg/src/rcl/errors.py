"""Exception hierarchy and diagnostics."""

from __future__ import annotations

from dataclasses import dataclass


class RclError(Exception):
    """Base class for every error raised by this package."""


class TimeOverflowError(RclError):
    pass


class MicrostepOverflowError(RclError):
    pass


class ValueKindError(RclError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str
    severity: str = "error"
    file: str = "<input>"

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}: {self.severity}: {self.message}"


class DiagnosticError(RclError):
    """Frontend failure carrying one or more diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


class ParseError(DiagnosticError):
    def __init__(self, diagnostic: Diagnostic, expected: tuple[str, ...] = ()):
        super().__init__([diagnostic])
        self.expected = expected

    @property
    def line(self) -> int:
        return self.diagnostics[0].line

    @property
    def col(self) -> int:
        return self.diagnostics[0].col


class CausalityCycleError(DiagnosticError):
    def __init__(self, cycles: list[list[str]], diagnostics: list[Diagnostic]):
        super().__init__(diagnostics)
        self.cycles = cycles


class RuntimeFault(RclError):
    """Fail-stop error raised while executing a program."""


class BodyError(RuntimeFault):
    pass


class TagInPastError(RuntimeFault):
    pass


class ShutdownInProgress(RclError):
    """Raised to a caller injecting an event after shutdown began."""


class ProtocolError(RclError):
    pass


class FederationError(RclError):
    pass
