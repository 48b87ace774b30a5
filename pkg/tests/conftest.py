import numpy as np
import pytest

from plumetomo import forward, grid, plume, wind


@pytest.fixture
def unit2():
    return grid.make_grid(0, 0, 1.0, 2, 2)


@pytest.fixture
def grid16():
    return grid.make_grid(-8, -8, 1.0, 16, 16)


@pytest.fixture(scope="session")
def plan600():
    # 5 stations x 24 s x 5 Hz walking the reflector around a 16 m square
    return forward.perimeter_plan((-8, 8, -8, 8), 5, 24.0, 5.0)


@pytest.fixture
def still_air():
    return wind.WindSeries.constant((0.0, 0.0), -20.0, 400.0)


def smooth_scene(amp=200.0, sigma=3.0, center=(0.5, -1.0), background=420.0):
    return plume.Scene((plume.GasSource(*center, amp, sigma, 3.0),), background)


def random_system(rng, grid_spec, n_beams):
    """Random in-plane beams crossing ``grid_spec`` with non-negative data."""
    from plumetomo.grid import BeamMeasurement
    from plumetomo.solver import assemble

    xmin, xmax, ymin, ymax = grid_spec.bounds
    beams = []
    while len(beams) < n_beams:
        a = rng.uniform((xmin, ymin), (xmax, ymax))
        b = rng.uniform((xmin, ymin), (xmax, ymax))
        if np.hypot(*(b - a)) < 0.5:
            continue
        beams.append(BeamMeasurement(len(beams), (*a, 1.5), (*b, 1.5), rng.uniform(0, 2000)))
    return assemble(grid_spec, beams)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
