import numpy as np
import pytest

from gestos.stream import HandFrame, Landmark


def make_frame(points, t=0.0, hand="right", conf=0.95) -> HandFrame:
    return HandFrame(t, hand, conf, tuple(Landmark(*p) for p in points))


def flat_points(x=0.5, y=0.5, z=0.0):
    return [(x, y, z)] * 21


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
