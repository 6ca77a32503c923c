"""Quantum dynamics of a 1D two-electron model atom in strong laser fields.

Walker-ensemble propagation with distance-weighted electron-electron
potentials, plus exact-grid and time-dependent Hartree-Fock reference
solvers on the same footing.
"""

from tdqmc.errors import (
    ConfigurationError,
    ConvergenceError,
    DegenerateStateError,
    DivergenceError,
    TdqmcError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ConvergenceError",
    "DegenerateStateError",
    "DivergenceError",
    "TdqmcError",
    "__version__",
]
