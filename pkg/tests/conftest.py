import numpy as np
import pytest

from hele_shaw_lab.field_core import PeriodicGrid1D, StripGrid
from hele_shaw_lab.hele_shaw import run
from hele_shaw_lab.hodograph import trace_from_interface
from hele_shaw_lab.laplace_strip import InterfaceState
from hele_shaw_lab.schedule import SlopeSchedule


def make_state(n_x=64, n_y=32, gamma=None, H=2.0, schedule=None):
    g = StripGrid(PeriodicGrid1D(n_x), n_y)
    gam = np.zeros(n_x) if gamma is None else gamma(g.horizontal.x)
    return InterfaceState.initial(g, gam, H=H, schedule=schedule or SlopeSchedule.constant())


@pytest.fixture(scope="session")
def mode_run():
    """k = 2 cosine of amplitude eps = 0.05 on 64x32, kept pressures, every step."""
    eps = 0.05
    s0 = make_state(64, 32, lambda x: -eps * np.cos(2 * x))
    traj = run(s0, 0.01, 30, 1, keep_pressure=True)
    return traj, trace_from_interface(traj, eps)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
