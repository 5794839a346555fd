import pytest

from ripzz.config import preset, reduced_device


def pytest_addoption(parser):
    parser.addoption("--slow", action="store_true", default=False, help="run long full-quantum checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running check, enabled with --slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--slow"):
        return
    skip = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def row1():
    return preset("fsr1400")


@pytest.fixture(scope="session")
def row4():
    return preset("fsr200")


@pytest.fixture(scope="session")
def anchor():
    """Reduced symmetric device at eps=300, chi=10, Delta=100, g=100 MHz."""
    return reduced_device(-0.010, -0.010, 0.100, 0.100, 0.300)


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
