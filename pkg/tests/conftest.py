import numpy as np
import pytest

from ripa import ContinuousConfig, DiscreteConfig, QuadraticTime, Rotation2D, run, simulate_second_order
from ripa.schedules import PowerDecay

# filled by tests/test_acceptance.py, printed once at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


ALPHA, EPS = 10.0, 1.25
X0 = (10.0, 10.0)


@pytest.fixture(scope="session")
def rotation():
    return Rotation2D()


@pytest.fixture(scope="session")
def e5_config():
    return ContinuousConfig(ALPHA, QuadraticTime(ALPHA, EPS), X0)


@pytest.fixture(scope="session")
def e5(rotation, e5_config):
    return simulate_second_order(rotation, e5_config)


@pytest.fixture(scope="session")
def ripa_rotation(rotation):
    cfg = DiscreteConfig(X0, ALPHA, 1.0, EPS, "standard", max_iters=100_000)
    traj, report = run(rotation, cfg)
    return cfg, traj, report


@pytest.fixture(scope="session")
def ripa_perturbed(rotation):
    cfg = DiscreteConfig(X0, ALPHA, 1.0, EPS, "perturbed", max_iters=100_000,
                         perturbation=PowerDecay(1.0, 3.0))
    traj, report = run(rotation, cfg)
    return cfg, traj, report


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
