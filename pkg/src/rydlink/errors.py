"""Exception types shared across the package.

Each class maps onto one CLI exit code so that drivers can translate
failures without inspecting messages.
"""


class RydlinkError(Exception):
    exit_code = 1


class InvalidArgumentError(RydlinkError, ValueError):
    """Bad input: wrong boundary, malformed config, overlapping subsystems."""

    exit_code = 2


class ResourceError(RydlinkError):
    """A requested object would exceed a hard size cap."""

    exit_code = 3


class NumericalError(RydlinkError, ArithmeticError):
    """A numerical routine failed to converge or produced garbage."""

    exit_code = 4

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
