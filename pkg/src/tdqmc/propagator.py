"""Crank-Nicolson propagation in real and rotated (complex) time.

One stepper serves every wave in the package: single 1D fields, batches
of guiding waves sharing a grid, and (through alternating tridiagonal
sweeps) the full 2D two-electron state. The Hamiltonian is
H = -1/2 d^2/dx^2 + v with a 3-point Laplacian and zero boundary
values; each step solves the Cayley form

    (1 + i Delta H / 2) w' = (1 - i Delta H / 2) w,

with Delta = dt * exp(-i * rotation_angle). At rotation_angle = 0 the
step is unitary to rounding; for rotated time the norm decays and the
caller renormalizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from tdqmc.errors import ConfigurationError, DivergenceError
from tdqmc.numerics import Grid1D, WaveField, normalize
from tdqmc.tridiag import thomas_solve

__all__ = [
    "StepSpec",
    "cn_step",
    "cn_step_batch",
    "relax",
    "adi_step_2d",
    "absorber_mask",
    "apply_hamiltonian",
    "hamiltonian_expectation",
]


@dataclass(frozen=True)
class StepSpec:
    """Time step and complex-time rotation.

    rotation_angle = 0 is real time, pi/2 is pure imaginary time;
    intermediate angles damp excited states while retaining real-time
    phase advance.
    """

    dt: float = 0.1
    rotation_angle: float = 0.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not 0.0 <= self.rotation_angle <= np.pi / 2:
            raise ConfigurationError(
                f"rotation_angle must lie in [0, pi/2], got {self.rotation_angle}"
            )

    @property
    def delta(self) -> complex:
        return self.dt * np.exp(-1j * self.rotation_angle)


def cn_step_batch(amps: np.ndarray, v, dx: float, spec: StepSpec) -> np.ndarray:
    """Advance a batch of waves one Crank-Nicolson step.

    Parameters
    ----------
    amps : (n,) or (n, batch) complex array
        Wave amplitudes; the grid index leads.
    v : (n,) or (n, batch) real array
        Potential on the grid, per batch member when 2D.
    dx : float
        Grid spacing.
    spec : StepSpec

    Returns
    -------
    (n,) or (n, batch) complex array
    """
    amps = np.asarray(amps, dtype=np.complex128)
    v = np.asarray(v)
    if amps.ndim == 2 and v.ndim == 1:
        v = v[:, None]
    z = 0.5j * spec.delta
    # H diagonal is 1/dx^2 + v, off-diagonal -1/(2 dx^2)
    k_off = 1.0 / (2.0 * dx * dx)
    diag_a = 1.0 + z * (2.0 * k_off + v)
    diag_b = 2.0 - diag_a  # 1 - z * (...)
    off_a = -z * k_off
    off_b = z * k_off

    rhs = diag_b * amps
    rhs[:-1] += off_b * amps[1:]
    rhs[1:] += off_b * amps[:-1]

    out = thomas_solve(off_a, diag_a, off_a, rhs)
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite amplitudes after Crank-Nicolson step")
    return out


def cn_step(w: WaveField, v: np.ndarray, spec: StepSpec) -> WaveField:
    """Single-wave Crank-Nicolson step; see cn_step_batch."""
    v = np.asarray(v)
    if v.shape != (w.grid.n_points,):
        raise ConfigurationError(
            f"potential shape {v.shape} does not match grid"
        )
    return WaveField(w.grid, cn_step_batch(w.amplitudes, v, w.grid.dx, spec))


def relax(
    w: WaveField,
    v_builder: Union[np.ndarray, Callable[[int, WaveField], np.ndarray]],
    n_steps: int,
    spec: StepSpec,
) -> WaveField:
    """Rotated-time relaxation with renormalization after every step.

    `v_builder` is either a fixed potential array or a callable
    (step index, current wave) -> potential, re-evaluated every step.
    """
    if spec.rotation_angle <= 0:
        raise ConfigurationError("relaxation requires rotation_angle > 0")
    if callable(v_builder):
        build = v_builder
    else:
        v_fixed = np.asarray(v_builder)
        build = lambda step, wave: v_fixed  # noqa: E731
    for step in range(n_steps):
        w = normalize(cn_step(w, build(step, w), spec))
    return w


def apply_hamiltonian(amps: np.ndarray, v, dx: float) -> np.ndarray:
    """H amps with the 3-point Laplacian and zero boundary values.

    Shapes as in cn_step_batch.
    """
    amps = np.asarray(amps)
    v = np.asarray(v)
    if amps.ndim == 2 and v.ndim == 1:
        v = v[:, None]
    k_off = 1.0 / (2.0 * dx * dx)
    out = (2.0 * k_off + v) * amps
    out[:-1] -= k_off * amps[1:]
    out[1:] -= k_off * amps[:-1]
    return out


def hamiltonian_expectation(w: WaveField, v: np.ndarray) -> float:
    """<w| -1/2 d^2/dx^2 + v |w> for a normalized wave."""
    h_amp = apply_hamiltonian(w.amplitudes, np.asarray(v), w.grid.dx)
    return float(np.real(np.sum(np.conj(w.amplitudes) * h_amp)) * w.grid.dx)


def adi_step_2d(
    psi: np.ndarray,
    v2,
    dx: float,
    spec: StepSpec,
    order: int = 0,
) -> np.ndarray:
    """Advance a 2D wave by alternating full-Cayley tridiagonal sweeps.

    Each direction gets one Cayley step of H_i = -1/2 d^2/dx_i^2 + V_i,
    where V_1 + V_2 equals the full potential. Pass `v2` either as one
    (n, n) array (split half-and-half between the sweeps) or as a tuple
    (V_1, V_2). Both factors are exactly unitary in real time, so the
    composition conserves the norm to rounding; alternating the sweep
    order via `order` (0 or 1, typically the step parity) makes
    consecutive steps a second-order pairwise-symmetric composition.
    For a separable potential the step factorizes exactly into the two
    1D cn_step factors.

    Parameters
    ----------
    psi : (n, n) complex array, axis 0 = x1, axis 1 = x2
    v2 : (n, n) real array or tuple of two such arrays
    dx : float
    spec : StepSpec
    order : int
        0 sweeps x1 then x2; 1 sweeps x2 then x1.

    Returns
    -------
    (n, n) complex array
    """
    psi = np.asarray(psi, dtype=np.complex128)
    n = psi.shape[0]
    if psi.shape != (n, n):
        raise ConfigurationError(f"psi must be square, got {psi.shape}")
    if isinstance(v2, tuple):
        v_a, v_b = (np.asarray(v) for v in v2)
    else:
        v_a = 0.5 * np.asarray(v2)
        v_b = v_a
    if v_a.shape != (n, n) or v_b.shape != (n, n):
        raise ConfigurationError("potential shape does not match psi")

    def sweep_axis0(field: np.ndarray, pot: np.ndarray) -> np.ndarray:
        # columns are independent systems along x1; pot varies per column
        return cn_step_batch(field, pot, dx, spec)

    if order % 2 == 0:
        psi = sweep_axis0(psi, v_a)
        psi = sweep_axis0(
            np.ascontiguousarray(psi.T), np.ascontiguousarray(v_b.T)
        ).T
    else:
        psi = sweep_axis0(
            np.ascontiguousarray(psi.T), np.ascontiguousarray(v_b.T)
        ).T
        psi = sweep_axis0(np.ascontiguousarray(psi), v_a)
    return np.ascontiguousarray(psi)


def absorber_mask(grid: Grid1D, start_fraction: float = 0.8, exponent: float = 0.125) -> np.ndarray:
    """Soft absorbing mask, 1 in the interior, cos^exponent taper to 0
    at the box edge beyond |x| = start_fraction * x_max.

    Assumes a grid centered on the origin.
    """
    x = grid.points
    x_edge = max(abs(grid.x_min), abs(grid.x_max))
    x_a = start_fraction * x_edge
    mask = np.ones_like(x)
    outside = np.abs(x) > x_a
    arg = np.pi * (np.abs(x[outside]) - x_a) / (2.0 * (x_edge - x_a))
    mask[outside] = np.cos(arg) ** exponent
    return mask
