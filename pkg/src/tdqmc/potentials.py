"""Soft-core model-atom potentials and the laser pulse.

The 1D helium model: nuclear charge 2, electron-nuclear attraction
softened by a (bohr^2), electron-electron repulsion softened by b
(bohr). The laser couples in the dipole approximation, length gauge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tdqmc.errors import ConfigurationError

__all__ = [
    "SoftCoreParams",
    "PulseSpec",
    "v_en",
    "v_ee",
    "field",
    "v_ext",
]

ENVELOPES = ("sin2", "flat")


@dataclass(frozen=True)
class SoftCoreParams:
    """Softening parameters of the model atom, atomic units."""

    a: float = 1.0
    b: float = 1.2
    nuclear_charge: float = 2.0

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ConfigurationError(
                f"softening parameters must be positive, got a={self.a} b={self.b}"
            )


@dataclass(frozen=True)
class PulseSpec:
    """Laser pulse: envelope * e0 * cos(omega (t - t_start)).

    Parameters
    ----------
    e0 : float
        Peak field amplitude, a.u.
    omega : float
        Carrier frequency, a.u.
    n_cycles : int
        Pulse duration in carrier periods.
    envelope : str
        "sin2" for a sin^2 ramp over the whole pulse, "flat" for a
        rectangular envelope.
    t_start : float
        Switch-on time, a.u.
    """

    e0: float
    omega: float
    n_cycles: int = 8
    envelope: str = "sin2"
    t_start: float = 0.0

    def __post_init__(self):
        if self.e0 < 0:
            raise ConfigurationError(f"e0 must be >= 0, got {self.e0}")
        if self.omega <= 0:
            raise ConfigurationError(f"omega must be positive, got {self.omega}")
        if self.n_cycles < 1:
            raise ConfigurationError(f"n_cycles must be >= 1, got {self.n_cycles}")
        if self.envelope not in ENVELOPES:
            raise ConfigurationError(
                f"envelope must be one of {ENVELOPES}, got {self.envelope!r}"
            )

    @property
    def duration(self) -> float:
        return self.n_cycles * 2.0 * np.pi / self.omega


def v_en(x, params: SoftCoreParams = SoftCoreParams()):
    """Electron-nuclear attraction -Z / sqrt(a + x^2)."""
    return -params.nuclear_charge / np.sqrt(params.a + np.asarray(x, float) ** 2)


def v_ee(d, params: SoftCoreParams = SoftCoreParams()):
    """Electron-electron repulsion 1 / (b + |d|) at separation d."""
    return 1.0 / (params.b + np.abs(d))


def field(t, pulse: PulseSpec):
    """Electric field at time t; zero outside the pulse window."""
    t = np.asarray(t, float)
    tau = t - pulse.t_start
    inside = (tau >= 0.0) & (tau <= pulse.duration)
    if pulse.envelope == "sin2":
        env = np.sin(np.pi * tau / pulse.duration) ** 2
    else:
        env = np.ones_like(tau)
    e = np.where(inside, env * pulse.e0 * np.cos(pulse.omega * tau), 0.0)
    return e if e.shape else float(e)


def v_ext(x, t: float, pulse: PulseSpec):
    """Length-gauge dipole coupling -x E(t)."""
    return -np.asarray(x, float) * field(t, pulse)
