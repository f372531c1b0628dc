import numpy as np
import pytest

from satseek.core_model import PlantSpec, PolytopicHessian
from satseek.dither import DitherSpec
from satseek.lmi import solve_synthesis
from satseek.simulate import SimConfig

H0 = np.array([[100.0, 30.0], [30.0, 20.0]])
THETA_STAR = np.array([2.0, 4.0])
LIMITS = np.array([2.0, 2.0])
REFERENCE_GAIN = np.array([[-0.0662, 0.0666], [0.0960, -0.3655]])


@pytest.fixture(scope="session")
def hess():
    return PolytopicHessian.scaled(H0, 0.1)


@pytest.fixture(scope="session")
def plant(hess):
    return PlantSpec(10.0, THETA_STAR, hess, LIMITS)


@pytest.fixture(scope="session")
def dither():
    return DitherSpec([0.1, 0.1], ("5", "7"), 10.0)


@pytest.fixture(scope="session")
def synthesis(hess):
    return solve_synthesis(hess, LIMITS, eta=1.0, epsilon=0.5)


@pytest.fixture(scope="session")
def base_cfg(plant, dither, synthesis):
    return SimConfig(plant, dither, synthesis.gain, [1.0, 0.0], [2.5, 6.0], t_end=6.0)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(label, ok, detail):
        line = f"{label} {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
