import pytest

from stationrepack import _kernels


@pytest.fixture(params=sorted(_kernels.backends()))
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    mod = _kernels.backends()[request.param]
    monkeypatch.setattr(_kernels, "dpll", mod.dpll)
    monkeypatch.setattr(_kernels, "walksat", mod.walksat)
    return request.param


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an exit criterion; returns the verdict."""

    def record(number, title, ok, detail=""):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
