from __future__ import annotations

import pytest

_LINES = pytest.StashKey[dict]()


@pytest.fixture
def record(request):
    """``record(n, ok, detail)`` stores one acceptance line for the summary."""
    store = request.config.stash.setdefault(_LINES, {})

    def _record(n: int, ok: bool, detail: str) -> bool:
        store[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_LINES, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for n in sorted(store):
            terminalreporter.write_line(store[n])
