import numpy as np
import pytest

from kickback_walk.hamiltonian import build_reduced
from kickback_walk.lattice import ChainConfig
from kickback_walk.process import SamplerSettings, ensemble

FIG4 = ChainConfig(25, 11, 13)
FIG4_SEED = 20080101
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def fig4_hamiltonians():
    return build_reduced(FIG4), build_reduced(FIG4.as_free())


@pytest.fixture(scope="session")
def fig4_ensembles(fig4_hamiltonians):
    """10^4 trajectories each; the free run uses seed + 1 so the samples are independent."""
    h, h0 = fig4_hamiltonians
    inter = ensemble(h, None, SamplerSettings(dt=0.005, horizon=25.0, n_traj=10_000, seed=FIG4_SEED))
    free = ensemble(h0, None, SamplerSettings(dt=0.005, horizon=25.0, n_traj=10_000, seed=FIG4_SEED + 1))
    return inter, free


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
