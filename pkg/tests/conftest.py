import numpy as np
import pytest

from relaxctl.model import ModelParams, build_hamiltonian, build_jumps, build_liouvillian
from relaxctl.operators import down_state
from relaxctl.spectral import diagonalize, steady_state

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def chain5():
    """Five-site chain at the reference parameters, diagonalized once per session."""
    p = ModelParams()
    s = diagonalize(build_liouvillian(p))
    return p, s, down_state(p.N), steady_state(s)


@pytest.fixture(scope="session")
def chain3():
    p = ModelParams(N=3)
    s = diagonalize(build_liouvillian(p))
    return p, s, down_state(p.N), steady_state(s), build_hamiltonian(p), build_jumps(p)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
