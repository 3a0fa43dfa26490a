"""Exception types shared across the package."""


class CompseError(Exception):
    """Base class for all package errors."""


class ShapeError(CompseError, ValueError):
    """Operands have incompatible shapes or geometry."""


class ContractError(CompseError, ValueError):
    """A documented precondition was violated by the caller."""


class NumericError(CompseError, ArithmeticError):
    """A computation produced or received non-finite values."""


class ParseError(CompseError, ValueError):
    """A file or stream does not match its expected format."""


class DegenerateInputError(CompseError, ValueError):
    """Input is degenerate for the requested operation (e.g. all-zero reference)."""
