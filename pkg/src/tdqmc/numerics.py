"""Uniform 1D grids and complex wave fields.

Rectangle-rule quadrature on a uniform grid is the substrate for every
wavefunction in the package: guiding waves, mean-field orbitals, and the
axes of the 2D two-electron solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from tdqmc.errors import ConfigurationError, DegenerateStateError

__all__ = [
    "Grid1D",
    "WaveField",
    "inner_product",
    "norm",
    "normalize",
    "expectation",
    "gaussian",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform spatial grid in atomic units.

    Parameters
    ----------
    x_min, x_max : float
        Box endpoints in bohr.
    n_points : int
        Number of grid points, at least 8.

    Notes
    -----
    The spacing is ``dx = (x_max - x_min) / (n_points - 1)`` and the
    points are ``x_j = x_min + j * dx``, reproducible exactly.
    """

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 8:
            raise ConfigurationError(
                f"need at least 8 grid points, got {self.n_points}"
            )
        if not self.x_max > self.x_min:
            raise ConfigurationError(
                f"x_max ({self.x_max}) must exceed x_min ({self.x_min})"
            )

    @classmethod
    def centered(cls, extent: float, n_points: int) -> "Grid1D":
        """Grid spanning `extent` bohr symmetrically about the origin."""
        return cls(-0.5 * extent, 0.5 * extent, n_points)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @cached_property
    def points(self) -> np.ndarray:
        x = self.x_min + np.arange(self.n_points) * self.dx
        x.setflags(write=False)
        return x


@dataclass(frozen=True, eq=False)
class WaveField:
    """Complex amplitudes sampled on a :class:`Grid1D`.

    Amplitudes are treated as immutable once constructed; operations
    return new fields.
    """

    grid: Grid1D
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=np.complex128)
        if amp.shape != (self.grid.n_points,):
            raise ConfigurationError(
                f"amplitude shape {amp.shape} does not match grid "
                f"({self.grid.n_points} points)"
            )
        object.__setattr__(self, "amplitudes", amp)


def _require_same_grid(a: WaveField, b: WaveField) -> Grid1D:
    if a.grid != b.grid:
        raise ConfigurationError("wave fields live on different grids")
    return a.grid


def inner_product(a: WaveField, b: WaveField) -> complex:
    """Rectangle-rule overlap <a|b> = sum_j conj(a_j) b_j dx.

    The reduction order is numpy's deterministic pairwise sum, so the
    result is bit-reproducible and exactly conjugate-symmetric.
    """
    grid = _require_same_grid(a, b)
    return complex(np.sum(np.conj(a.amplitudes) * b.amplitudes) * grid.dx)


def norm(w: WaveField) -> float:
    """L2 norm under the rectangle rule."""
    n2 = np.sum(np.abs(w.amplitudes) ** 2) * w.grid.dx
    return float(np.sqrt(n2))


def normalize(w: WaveField) -> WaveField:
    """Rescale to unit norm; direction is unchanged.

    Raises
    ------
    DegenerateStateError
        If the field has zero norm.
    """
    n = norm(w)
    if n <= 0.0 or not np.isfinite(n):
        raise DegenerateStateError(f"cannot normalize field with norm {n}")
    return WaveField(w.grid, w.amplitudes / n)


def expectation(w: WaveField, values: np.ndarray) -> float:
    """<w| v |w> for a real diagonal observable sampled on the grid.

    Assumes `w` is normalized; no division by the norm is performed.
    """
    values = np.asarray(values)
    if values.shape != (w.grid.n_points,):
        raise ConfigurationError(
            f"observable shape {values.shape} does not match grid"
        )
    dens = np.abs(w.amplitudes) ** 2
    return float(np.sum(values * dens) * w.grid.dx)


def gaussian(
    grid: Grid1D,
    width: float,
    center: float = 0.0,
    momentum: float = 0.0,
    normalized: bool = True,
) -> WaveField:
    """Gaussian wave exp(-(x - center)^2 / width^2) * exp(i momentum x).

    `width` follows the convention of the initial guiding waves: the
    density |w|^2 has standard deviation width / 2.
    """
    if width <= 0:
        raise ConfigurationError(f"width must be positive, got {width}")
    x = grid.points
    amp = np.exp(-((x - center) ** 2) / width**2).astype(np.complex128)
    if momentum != 0.0:
        amp = amp * np.exp(1j * momentum * x)
    w = WaveField(grid, amp)
    return normalize(w) if normalized else w
