import pytest

from monosched.channel import Deterministic, Discrete, TruncatedExponential


@pytest.fixture
def two_atom():
    return Discrete(((1.0, 0.5), (4.0, 0.5)))


@pytest.fixture
def trunc_exp():
    return TruncatedExponential(0.001, 1.0)


@pytest.fixture
def unit_channel():
    return Deterministic(1.0)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Collects one summary line per acceptance criterion for the terminal report."""
    return request.config.stash.setdefault(ACCEPTANCE_LINES, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines):
        terminalreporter.write_line(line)
