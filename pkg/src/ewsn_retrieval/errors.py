"""Exception hierarchy.

Every error raised by the package derives from :class:`EwsnError` and carries
the process exit code the command line maps it to.
"""


class EwsnError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ValidationError(EwsnError, ValueError):
    """Invalid parameters or inputs (s > N, negative rates, mismatched results)."""

    exit_code = 2


class DimensionError(ValidationError):
    """Matrix shapes are incompatible with the requested operation."""


class CapacityError(EwsnError):
    """A Kronecker construction would exceed the configured dimension cap."""

    exit_code = 3

    def __init__(self, dimension: int, cap: int):
        self.dimension = dimension
        self.cap = cap
        super().__init__(
            f"Kronecker dimension {dimension} exceeds the dimension cap {cap}; "
            "use the scalar path (closed form or quadrature) instead"
        )


class NumericError(EwsnError, ArithmeticError):
    """Non-finite values, singular solves or non-converging quadrature."""


class OutputError(EwsnError, OSError):
    """An output file could not be written."""

    exit_code = 4
