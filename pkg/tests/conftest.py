import pytest

from annuli.metric import builtin_metric

_VERDICTS = []


@pytest.fixture
def report():
    """Record a pass/fail line for one acceptance criterion, then assert it."""

    def _report(number, ok, detail=""):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def euclid():
    return builtin_metric("euclidean")


@pytest.fixture(scope="session")
def hdisk():
    return builtin_metric("hyperbolic_disk")


@pytest.fixture(scope="session")
def sphere():
    return builtin_metric("spherical")
