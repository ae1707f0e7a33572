"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data problems
exit 2, numerical problems exit 3.
"""


class AppdemogError(Exception):
    """Base class for errors raised by this package."""


class DataFormatError(AppdemogError):
    """Malformed or inconsistent input data (CSV rows, dangling ids, bad shapes)."""


class UnbalanceableError(AppdemogError):
    """A labeled subset cannot be balanced or subsampled (a class is too small)."""


class DegenerateLabelsError(AppdemogError):
    """Training labels contain a single class."""


class NumericalError(AppdemogError):
    """A numerical routine failed to produce a usable result."""
