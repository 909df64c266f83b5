import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rcl.cli import bundled_programs  # noqa: E402
from rcl.compiler import compile_file, compile_source  # noqa: E402


@pytest.fixture(scope="session")
def programs():
    return bundled_programs()


@pytest.fixture(scope="session")
def vision(programs):
    return compile_file(programs["vision_assistant.rcl"])


@pytest.fixture
def compile_text():
    def go(text, filename="<test>"):
        return compile_source(text, filename)
    return go


ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {n:2d}. {name}: {detail}")
