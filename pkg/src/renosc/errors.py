"""Exception hierarchy shared across the package."""


class RenoscError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(RenoscError, ValueError):
    """Malformed arguments: dimension mismatches, non-finite entries, bad config."""


class RankDeficiencyError(RenoscError):
    """A frame's columns are numerically linearly dependent."""


class DegenerateCoefficientError(RenoscError):
    """Leading coefficient of a higher-order operator is not positive."""


class BlowUpError(RenoscError):
    """Frame propagation produced non-finite values."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class InvarianceViolationError(RenoscError):
    """psi1 and psi2 vanish simultaneously where the index needs them not to."""

    def __init__(self, message, node=None, shelf=None):
        super().__init__(message)
        self.node = node
        self.shelf = shelf


class NeedsFinerGridError(RenoscError):
    """The sampled path is too coarse to resolve a crossing or a loss point."""


class ShelfAssertionError(RenoscError):
    """A structural identity (zero bottom/right shelf index) failed numerically."""


class ExpressionError(RenoscError):
    """Base for coefficient-expression problems."""


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message, offset, expected=()):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.expected = tuple(expected)


class ExpressionEvalError(ExpressionError):
    """Division by zero, sqrt of a negative, or similar during evaluation."""


class ConfigError(RenoscError, ValueError):
    """Problem configuration is inconsistent or unreadable."""
