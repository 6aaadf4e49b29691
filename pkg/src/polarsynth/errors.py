"""Exception types shared across the package."""


class PolarError(Exception):
    """Base class for all errors raised by polarsynth."""


class ShapeError(PolarError, ValueError):
    """Inputs that should be dimension-matched are not."""


class PreconditionError(PolarError, ValueError):
    """An input violates a documented precondition (range, parity, finiteness)."""


class FormatError(PolarError, ValueError):
    """A file on disk is missing, truncated or has a malformed header."""


class NumericalError(PolarError, RuntimeError):
    """A computation produced non-finite values (e.g. diverging training)."""
