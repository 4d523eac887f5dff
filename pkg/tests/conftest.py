import numpy as np
import pytest

import gsblow as gb


@pytest.fixture(scope="session")
def osc2000():
    """Harmonic oscillator on the acceptance grid: q = x^2, R_max = 10, n = 2000."""
    grid = gb.build_grid("cartesian", 10.0, 2000)
    op = gb.assemble(grid, gb.PotentialSpec.power(2.0))
    gs = gb.ground_state(op)
    return grid, op, gs


@pytest.fixture(scope="session")
def osc2000_pairs(osc2000):
    _, op, _ = osc2000
    return gb.lowest_k(op, 3)


@pytest.fixture(scope="session")
def quartic200():
    """Oracle-sized quartic well: q = x^4, R_max = 12, n = 200."""
    grid = gb.build_grid("cartesian", 12.0, 200)
    op = gb.assemble(grid, gb.PotentialSpec.power(4.0))
    gs = gb.ground_state(op)
    return grid, op, gs


@pytest.fixture(scope="session")
def quartic400():
    grid = gb.build_grid("cartesian", 12.0, 400)
    op = gb.assemble(grid, gb.PotentialSpec.power(4.0))
    gs = gb.ground_state(op)
    return grid, op, gs


def bump_source(grid, gs, amplitude=0.3, center=0.8, width=0.6):
    """phi + amplitude * offset Gaussian; ground-state bounded, f1 > 0."""
    return gs.phi + gb.gaussian_bump(grid, center, width, amplitude)
