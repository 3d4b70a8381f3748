import math

import numpy as np
import pytest

from torusflow import build_grid, make_circle_profile, make_interval_profile, make_star_profile


@pytest.fixture(scope="session")
def annulus():
    return make_interval_profile(1.0, 2.0)


@pytest.fixture(scope="session")
def round_torus():
    return make_circle_profile((0.0, 2.0), 0.5)


@pytest.fixture(scope="session")
def oval_torus():
    return make_star_profile((0.0, 2.0), {"a0": 0.5, "a2": 0.1})


@pytest.fixture(scope="session")
def grid1d(annulus):
    return build_grid(annulus, 65)


@pytest.fixture(scope="session")
def grid2d(round_torus):
    return build_grid(round_torus, (16, 16))


@pytest.fixture(scope="session")
def oval_grid(oval_torus):
    return build_grid(oval_torus, (16, 24))


def radial_s(grid):
    """Polar coordinate ``s`` (2D) or normalised ``(r - r0)/(r1 - r0)`` (1D) at every node."""
    if grid.dim == 1:
        r0, r1 = grid.profile.r_range
        return (grid.r - r0) / (r1 - r0)
    return np.broadcast_to(grid.s[:, None], grid.shape).copy()


def smooth_field(grid, amplitude=1.0):
    """Neumann-compatible radial cosine."""
    return amplitude * np.cos(math.pi * radial_s(grid))


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE[key])
