"""Exception types shared across the library.

The CLI maps these onto exit codes: ConfigError -> 1, NumericalError -> 2,
ConvergenceError -> 3.
"""


class ConfigError(ValueError):
    """Invalid specification, parameters, or input data."""


class NumericalError(RuntimeError):
    """A numerical routine failed (non-PD covariance, diverging ODE, ...)."""


class ConvergenceError(RuntimeError):
    """An iterative optimisation failed to make progress."""
