import numpy as np
import pytest
from hypothesis import settings

from hyperfilter.density import ChartGrid, ulam_build
from hyperfilter.lab import Lab, log_trig_prior, torus_panel
from hyperfilter.manifold import CatMap, Solenoid
from hyperfilter.observation import VonMises

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

PRIOR_TERMS = ([[1, 0, 1.0, 0.3], [0, 1, 0.5, 1.0]], [[1, 1, 1.5, 2.0], [2, 1, 0.3, 0.0]])


@pytest.fixture(scope="session")
def cat():
    return CatMap()


@pytest.fixture(scope="session")
def solenoid():
    return Solenoid()


@pytest.fixture(scope="session")
def grid32():
    return ChartGrid("torus", (32, 32))


@pytest.fixture(scope="session")
def ulam32(cat, grid32):
    return ulam_build(cat, grid32, subsamples=16)


@pytest.fixture(scope="session")
def lab32(cat, grid32, ulam32):
    return Lab(cat, grid32, ulam32, VonMises((2.0, 2.0)), torus_panel())


@pytest.fixture(scope="session")
def lab64(cat):
    g = ChartGrid("torus", (64, 64))
    return Lab(cat, g, ulam_build(cat, g, subsamples=32), VonMises((2.0, 2.0)), torus_panel())


@pytest.fixture(scope="session")
def priors32(grid32):
    return [log_trig_prior(t, grid32) for t in PRIOR_TERMS]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
