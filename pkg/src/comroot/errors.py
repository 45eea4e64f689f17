"""Exception hierarchy shared by every module in the package."""


class RootFinderError(Exception):
    """Base class for all errors raised by comroot."""


class ArityMismatch(RootFinderError, ValueError):
    pass


class NonFiniteValue(RootFinderError, ArithmeticError):
    pass


class ExpressionError(RootFinderError, ValueError):
    pass


class ExpressionSyntaxError(ExpressionError):
    """Malformed expression text; ``offset`` is the byte offset of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(ExpressionError):
    pass


class ArityExceeded(ExpressionError):
    pass


class ExclusionSaturated(RootFinderError):
    """Too many consecutive rejections: the sampled region is (nearly) empty."""


class EmptyEstimator(RootFinderError):
    pass


class InsufficientData(RootFinderError):
    pass


class BudgetExhausted(RootFinderError):
    pass
