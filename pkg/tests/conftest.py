import numpy as np
import pytest

from cfwmmse.channel import PilotConfig, draw_channels
from cfwmmse.clustering import build_layout
from cfwmmse.scenario import generate_scenario
from cfwmmse.wmmse import LinkBudget


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte Carlo checks")


def pytest_terminal_summary(terminalreporter):
    from .acceptance_report import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def budget():
    return LinkBudget()


@pytest.fixture(scope="session")
def pilot(budget):
    return PilotConfig(tau_u=2000, rho_u=budget.pilot_snr)


@pytest.fixture(scope="session")
def small_drop():
    """M=6, K=8, L=4, S=2 drop with one channel realization."""
    sc = generate_scenario(6, 8, 4, seed=3)
    layout = build_layout(sc, 2, seed=0)
    g = draw_channels(sc, seed=4)
    return sc, layout, g


def random_complex(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
