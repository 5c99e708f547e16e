from __future__ import annotations

import pytest

from tipkit import ecosystem as eco


@pytest.fixture
def bistable():
    """(r, m) = (1, 0.075), b = b_c = 0.025: e2 and e3 both stable."""
    return eco.ModelParams(r=1.0, m=0.075, b=0.025, b_c=0.025)


@pytest.fixture
def base():
    return eco.ModelParams(r=0.75, m=0.075, b=0.025, b_c=0.025)


_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def verdict():
    """Record one acceptance line; the test then asserts on the same flag."""
    def record(number: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = (bool(ok), detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
