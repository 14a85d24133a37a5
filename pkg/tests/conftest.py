import pytest
from hypothesis import settings

from dpalab import ModelParams

settings.register_profile("dpalab", deadline=None, max_examples=60)
settings.load_profile("dpalab")


@pytest.fixture
def sym():
    """alpha = gamma = 1/2, delta_in = delta_out = 1 (c_in = c_out = 1/4)."""
    return ModelParams(0.5, 1.0, 1.0)


@pytest.fixture
def asym():
    return ModelParams(0.3, 0.4, 2.5)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_line(capsys):
    """Print one PASS/FAIL line immediately and repeat it in the terminal summary."""

    def emit(number: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
