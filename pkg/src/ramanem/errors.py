"""Exception types raised across the package."""


class RamanEMError(Exception):
    """Base class for all package errors."""


class ConfigurationError(RamanEMError, ValueError):
    """Invalid or inconsistent configuration values."""


class DimensionError(RamanEMError, ValueError):
    """Arrays or grids whose sizes do not match."""


class DomainError(RamanEMError, ValueError):
    """A quantity left the domain where a formula is defined."""


class EmptyDataError(RamanEMError, ValueError):
    """No usable data points remain."""


class RangeError(RamanEMError, ValueError):
    """Evaluation outside a tabulated range."""


class NumericalError(RamanEMError, ArithmeticError):
    """A solver produced non-finite values."""


class ParseError(RamanEMError, ValueError):
    """Malformed input file."""


class HarnessError(RamanEMError, RuntimeError):
    """An experiment could not produce a usable result."""
