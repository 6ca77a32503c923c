"""Gaussian kernel density estimation over walker positions.

A fixed-bandwidth pilot estimate feeds Abramson-style adaptive
per-walker bandwidths through the geometric-mean rule
sigma_k = sigma * sqrt(G / rho_k). The bandwidth controls the
correlation length of the distance-weighted electron-electron
potential; it can be fixed globally or chosen variationally by
minimizing the relaxed ground-state energy.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from tdqmc.errors import ConfigurationError, ConvergenceError

__all__ = [
    "BandwidthSpec",
    "pilot_density",
    "adaptive_bandwidths",
    "variational_sigma",
]

BANDWIDTH_MODES = ("global", "adaptive")


@dataclass(frozen=True)
class BandwidthSpec:
    """Bandwidth policy for the distance-weighted potential.

    mode "global" uses `sigma` for every walker and never refreshes;
    mode "adaptive" derives per-walker bandwidths from the pilot
    density every `refresh_every` steps, with `sigma` as the pilot
    bandwidth.
    """

    mode: str = "global"
    sigma: float = 5.0
    refresh_every: int = 10

    def __post_init__(self):
        if self.mode not in BANDWIDTH_MODES:
            raise ConfigurationError(
                f"bandwidth mode must be one of {BANDWIDTH_MODES}, got {self.mode!r}"
            )
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ConfigurationError(
                f"bandwidth sigma must be positive and finite, got {self.sigma}"
            )
        if self.refresh_every < 1:
            raise ConfigurationError(
                f"refresh_every must be >= 1, got {self.refresh_every}"
            )


def pilot_density(positions: np.ndarray, sigma: float) -> np.ndarray:
    """Fixed-bandwidth KDE evaluated at each walker position.

    rho_k = (1 / (M sigma sqrt(pi))) sum_l exp(-(x_k - x_l)^2 / sigma^2)

    Each kernel integrates to one, so rho is a proper density estimate.
    The self term bounds every rho_k from below by 1/(M sigma sqrt(pi)).
    """
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 1 or positions.size == 0:
        raise ConfigurationError("positions must be a non-empty 1D array")
    if sigma <= 0:
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    m = positions.size
    d = positions[:, None] - positions[None, :]
    kernels = np.exp(-((d / sigma) ** 2))
    return kernels.sum(axis=1) / (m * sigma * np.sqrt(np.pi))


def adaptive_bandwidths(positions: np.ndarray, sigma: float) -> np.ndarray:
    """Per-walker bandwidths sigma_k = sigma * sqrt(G / rho_k).

    G is the geometric mean of the pilot densities, so dense regions
    get bandwidths below the pilot value and sparse regions above it;
    the geometric mean of (sigma_k / sigma)^2 is exactly one.
    """
    rho = pilot_density(positions, sigma)
    log_g = np.mean(np.log(rho))
    return sigma * np.exp(0.5 * (log_g - np.log(rho)))


def variational_sigma(
    relax_energy: Callable[[float], float],
    sigma_grid: Sequence[float],
) -> tuple[float, list[tuple[float, float]]]:
    """Pick the pilot bandwidth that minimizes the relaxed energy.

    Parameters
    ----------
    relax_energy : callable
        Maps a candidate sigma to the relaxed ground-state energy,
        using a fixed seed so candidates are comparable.
    sigma_grid : sequence of positive floats

    Returns
    -------
    best_sigma : float
    scan : list of (sigma, energy) pairs in scan order; failed
        candidates carry energy = nan.

    Candidates whose relaxation raises are skipped with a warning;
    ties break toward the smaller sigma.
    """
    candidates = [float(s) for s in sigma_grid]
    if not candidates or any(s <= 0 for s in candidates):
        raise ConfigurationError("sigma_grid must be non-empty and positive")
    scan: list[tuple[float, float]] = []
    for s in candidates:
        try:
            e = float(relax_energy(s))
        except Exception as exc:  # noqa: BLE001 - candidate isolation
            warnings.warn(f"relaxation failed for sigma={s}: {exc}", stacklevel=2)
            e = np.nan
        scan.append((s, e))
    ok = [(s, e) for s, e in scan if np.isfinite(e)]
    if not ok:
        raise ConvergenceError("relaxation failed for every candidate sigma")
    best = min(ok, key=lambda se: (se[1], se[0]))
    return best[0], scan
