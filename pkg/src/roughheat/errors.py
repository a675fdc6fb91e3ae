"""Exception types shared across the package.

Every failure mode that callers are expected to handle gets its own class,
so CLI exit codes and pipeline reports can dispatch on type instead of
parsing messages.
"""


class RoughHeatError(Exception):
    """Base class for all package-specific errors."""


class InvalidParams(RoughHeatError, ValueError):
    """Parameter bundle violates a documented precondition."""


class InvalidHeight(InvalidParams):
    """Box or kernel height t outside (0, T]."""


class InvalidIndex(InvalidParams):
    """Annulus index j < 1."""


class IndexOutOfRange(InvalidParams):
    """Dyadic frequency index outside the resolvable band."""


class EmptyBox(RoughHeatError):
    """A box average was requested over a region with no sample points."""


class EmptyRegion(InvalidParams):
    """An off-diagonal probe received an empty cell set."""


class NotElliptic(InvalidParams):
    """Coefficient field fails the ellipticity certificate."""


class ShapeError(RoughHeatError, ValueError):
    """Array shapes inconsistent with the attached grid or ladder."""


class NumericalFailure(RoughHeatError, RuntimeError):
    """An eigensolve or linear solve did not converge."""


class ResolutionError(InvalidParams):
    """Requested time scale is not resolvable on the current grid."""


class RangeExceeded(RoughHeatError):
    """Nonlinearity evaluated outside its declared validity range."""


class NonConvergence(NumericalFailure):
    """Fixed-point iteration exhausted its budget.

    Carries the per-iteration diagnostics so callers can inspect the
    divergence pattern.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class InvalidTestFunction(InvalidParams):
    """Test function support escapes the sampled slab."""


class InvalidBox(InvalidParams):
    """Box (or its dilation) escapes the sampled slab."""
