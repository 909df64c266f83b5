"""Deterministic reactor coordination: a small language, scheduler and federation runtime."""

from .compiler import CompiledProgram, compile_file, compile_source
from .runtime.engine import Engine, RunConfig, run_program
from .tags import Tag

__version__ = "0.1.0"

__all__ = ["CompiledProgram", "Engine", "RunConfig", "Tag", "compile_file", "compile_source", "run_program"]
