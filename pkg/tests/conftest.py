from __future__ import annotations

import io
from pathlib import Path

import pytest

from ngsvar.simlab import write_substitute_inputs

DATA = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA


def stream(text: str) -> io.BytesIO:
    return io.BytesIO(text.encode("utf-8"))


@pytest.fixture(scope="session")
def substitute_config(tmp_path_factory) -> Path:
    """Substitute raw inputs in the public formats plus their run.cfg."""
    return write_substitute_inputs(tmp_path_factory.mktemp("substitute"), seed=2020)


ACCEPTANCE: list[str] = []


def record_acceptance(number: int, title: str, passed, detail: str) -> None:
    """``passed`` is a bool, or the string "WARN" for a check downgraded to a warning."""
    status = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
    line = f"criterion {number} {status}: {title} ({detail})"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
