"""Exception types shared across the package."""


class TdqmcError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(TdqmcError, ValueError):
    """Invalid or inconsistent run configuration.

    Raised by the config parser and by constructors that validate
    physical parameters (grid sizes, time steps, bandwidth modes).
    """


class ConvergenceError(TdqmcError, RuntimeError):
    """An iterative relaxation failed to reach its tolerance in the
    allotted number of steps."""


class DivergenceError(TdqmcError, RuntimeError):
    """A propagation produced non-finite values (wave amplitudes or
    walker positions)."""


class DegenerateStateError(TdqmcError, RuntimeError):
    """A projection-based excited-state search lost the excited
    component, leaving nothing to normalize."""
