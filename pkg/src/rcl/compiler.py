"""Front-to-back compilation: source text to a schedulable program."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .dsl import ast
from .dsl.checker import validate
from .dsl.elaborate import elaborate
from .dsl.parser import parse
from .errors import CausalityCycleError, DiagnosticError
from .graph import ReactionGraph, assign_levels, build_graph, cycle_diagnostics, detect_cycles
from .model import InstanceGraph


@dataclass
class CompiledProgram:
    ast: ast.Program
    ig: InstanceGraph
    graph: ReactionGraph
    levels: dict
    filename: str = "<input>"

    @property
    def digest(self) -> str:
        return self.ig.digest()


def expand(program: ast.Program, filename: str = "<input>") -> ast.Program:
    """Replace behavior blocks with the reactor definitions they compile to."""
    if not program.behaviors:
        return program
    from .bt.compile import behaviors_to_reactors
    extra = behaviors_to_reactors(program.behaviors, filename)
    return ast.Program(program.target, program.reactors + tuple(extra), ())


def compile_program(program: ast.Program, filename: str = "<input>") -> CompiledProgram:
    expanded = expand(program, filename)
    diags = validate(expanded, filename)
    if diags:
        raise DiagnosticError(diags)
    ig = elaborate(expanded, filename)
    g = build_graph(ig)
    cycles = detect_cycles(g)
    if cycles:
        raise CausalityCycleError(cycles, cycle_diagnostics(cycles, ig, filename))
    return CompiledProgram(expanded, ig, g, assign_levels(g), filename)


def compile_source(text: str, filename: str = "<input>") -> CompiledProgram:
    return compile_program(parse(text, filename), filename)


def compile_file(path) -> CompiledProgram:
    path = Path(path)
    return compile_source(path.read_text(encoding="utf-8"), str(path))
