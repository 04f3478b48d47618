"""Exception taxonomy shared across the package.

DataError covers anything caused by malformed or degenerate input data
(CLI exit code 3).  NumericError covers numerical failures during
computation, e.g. diverging training runs (CLI exit code 4).
"""


class DataError(ValueError):
    """Input data is malformed, inconsistent, or degenerate."""


class NumericError(RuntimeError):
    """A numerical computation failed (non-finite values, divergence)."""


class TrainingDiverged(NumericError):
    """Training loss blew up past the divergence guard."""
