import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rfs_fusion.gaussian import GaussianMixture
from rfs_fusion.labeled_rfs import Label, LmbDensity

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion lines recorded by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def gauss4(pos, var=100.0):
    """A 4-D single-component mixture at position ``pos`` with zero velocity."""
    m = np.array([pos[0], pos[1], 0.0, 0.0])
    return GaussianMixture.single(m, var * np.eye(4))


@pytest.fixture
def separated_lmb():
    return LmbDensity({
        Label(1, 1): (0.9, gauss4((0.0, 0.0))),
        Label(1, 2): (0.7, gauss4((400.0, 0.0))),
        Label(2, 1): (0.6, gauss4((0.0, 400.0))),
    })
