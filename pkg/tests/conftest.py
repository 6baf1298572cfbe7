import numpy as np
import pytest

from pdlab import ModelParams, RngStream

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return RngStream(20240601)


@pytest.fixture
def mp_sym():
    return ModelParams(1.0, [0.5, 0.5])


def interior_points(rng, d, n, margin=1e-3):
    """Random points of the open simplex (Dirichlet(1,...,1) pushed off the faces)."""
    e = -np.log(rng.uniform((n, d + 1)))
    X = e / e.sum(axis=1, keepdims=True)
    X = margin + (1 - (d + 1) * margin) * X
    return X[:, :d]
