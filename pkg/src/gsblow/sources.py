"""Source-term construction for the right-hand sides f, f1, f2."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_potential import Grid
from .spectrum import GroundState


def gaussian_bump(grid: Grid, center: float, width: float,
                  amplitude: float = 1.0) -> np.ndarray:
    """Gaussian bump centred at (center, 0, ...) on cartesian grids or at
    the radius ``center`` on radial grids.

    The cartesian variant is deliberately not even in x, so the bump has
    non-zero overlap with odd excited states.
    """
    if width <= 0:
        raise ValueError("bump width must be positive")
    if grid.geometry == "radial":
        dist2 = (grid.radii - center) ** 2
    else:
        shifted = grid.nodes.copy()
        shifted[:, 0] -= center
        dist2 = np.sum(shifted ** 2, axis=1)
    return amplitude * np.exp(-dist2 / (2.0 * width ** 2))


@dataclass(frozen=True)
class SourceSpec:
    """Additive source recipe: phi multiple + Gaussian bump + tabulated data."""

    phi_coeff: float = 0.0
    bump_amplitude: float = 0.0
    bump_center: float = 0.0
    bump_width: float = 1.0
    tabulated_path: str | None = None

    def build(self, grid: Grid, gs: GroundState) -> np.ndarray:
        f = self.phi_coeff * gs.phi
        if self.bump_amplitude != 0.0:
            f = f + gaussian_bump(grid, self.bump_center, self.bump_width,
                                  self.bump_amplitude)
        if self.tabulated_path is not None:
            data = np.loadtxt(self.tabulated_path, delimiter=",", ndmin=2)
            f = f + np.interp(grid.radii, data[:, 0], data[:, 1])
        return f
