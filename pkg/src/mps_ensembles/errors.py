"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, BudgetExceededError
and CapExceededError -> 3, NumericalError -> 4.
"""


class MpsEnsemblesError(Exception):
    """Base class for all package errors."""


class ConfigError(MpsEnsemblesError):
    """Invalid configuration, argument, or input data schema."""


class DimensionMismatchError(MpsEnsemblesError):
    """Operands have incompatible shapes."""


class CapExceededError(MpsEnsemblesError):
    """A dense object would exceed a configured size cap."""


class BudgetExceededError(MpsEnsemblesError):
    """A computation would exceed the configured cost budget."""


class NumericalError(MpsEnsemblesError):
    """A numerical routine failed (non-convergence, corrupted data)."""


class ConvergenceError(NumericalError):
    """An iterative solver failed to converge."""
