import numpy as np
import pytest

_ACCEPTANCE: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def report():
    """Record one PASS/FAIL line per acceptance criterion."""
    def _report(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:2d} [{title}]: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return passed
    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
