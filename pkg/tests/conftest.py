import numpy as np
import pytest

from retrolab import currents as cur
from retrolab import dynamics as dyn
from retrolab.grid import SpacetimeLattice

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def wide_lattice():
    # 20 packet widths across, so the periodic seam sits ~10 widths from the packet
    return SpacetimeLattice(nx=2048, dx=0.1, nt=1000, dt=0.01, x_min=-102.4)


@pytest.fixture(scope="session")
def moving_packet(wide_lattice):
    return dyn.gaussian_packet(wide_lattice, 1.0, -5.0, 10.0, 1.0)


@pytest.fixture(scope="session")
def moving_history(wide_lattice, moving_packet):
    return dyn.evolve_dirac(moving_packet, wide_lattice, 1.0, wide_lattice.nt)


@pytest.fixture(scope="session")
def moving_currents(moving_history):
    return cur.current_history(moving_history)


@pytest.fixture
def small_lattice():
    return SpacetimeLattice(nx=256, dx=0.1, nt=100, dt=0.01, x_min=-12.8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
