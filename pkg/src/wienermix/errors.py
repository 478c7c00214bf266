"""Exception types shared across the package."""


class WienermixError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(WienermixError, ValueError):
    """Operands live on different grids or have incompatible shapes."""


class InputFormatError(WienermixError, ValueError):
    """A file or CLI argument could not be parsed into a valid object."""


class UnsupportedOrderError(WienermixError, ValueError):
    """A chaos order outside the implemented range (1..3) was requested."""


class DegenerateInputError(WienermixError, ValueError):
    """An input is degenerate for the requested operation (e.g. zero vector)."""


class NonUnitaryOperatorError(WienermixError, ValueError):
    """A matrix or kernel that must preserve the inner product does not."""


class SingularShiftError(WienermixError, ValueError):
    """A shift cannot be inverted because -1 is (numerically) an eigenvalue."""
