"""Exception hierarchy shared by all modules.

ValidationError maps to CLI exit code 2 (bad inputs, violated preconditions),
NumericalError to exit code 3 (an algorithm failed to converge or lost
accuracy beyond its tolerance).
"""


class MimocepsError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(MimocepsError, ValueError):
    """Invalid input: dimension mismatch, schema violation, violated precondition."""


class NumericalError(MimocepsError, RuntimeError):
    """Numerical failure: non-convergence, tolerance breakdown, divergence."""
