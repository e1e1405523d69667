"""Exception hierarchy shared by all modules."""


class ArcsineLabError(Exception):
    """Base class for package errors."""


class ParameterError(ArcsineLabError, ValueError):
    """A parameter violates its documented domain."""


class BoundaryError(ArcsineLabError, ValueError):
    """A function was evaluated at a point where it is not defined."""


class UnsupportedMarginalError(ArcsineLabError, ValueError):
    """No closed-form one-dimensional marginal exists for these parameters."""


class NumericalError(ArcsineLabError, ArithmeticError):
    """An iterative numerical routine failed to converge."""


class AbsorbedError(ArcsineLabError, ArithmeticError):
    """A map was evaluated at a point where the orbit cannot continue."""


class TailCertificationError(ArcsineLabError):
    """A truncated series cannot be certified at the requested tolerance."""


class SizeError(ArcsineLabError, ValueError):
    """Input is too small, or a request is too large for the memory budget."""
