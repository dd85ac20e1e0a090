"""Exception types raised across the package."""


class QTuckerError(Exception):
    """Base class for all errors raised by qtucker."""


class ZeroVector(QTuckerError, ValueError):
    pass


class NotPowerOfTwo(QTuckerError, ValueError):
    pass


class DimensionMismatch(QTuckerError, ValueError):
    pass


class EmptySet(QTuckerError, ValueError):
    pass


class FullSet(QTuckerError, ValueError):
    pass


class PartitionMismatch(QTuckerError, ValueError):
    pass


class OddQubitCount(QTuckerError, ValueError):
    pass


class InfeasibleConstraint(QTuckerError, ValueError):
    pass


class InvalidBlockSize(QTuckerError, ValueError):
    pass


class AtMaxBlockSize(QTuckerError):
    pass


class NotUnitary(QTuckerError, ValueError):
    pass


class OpaqueWithoutMatrix(QTuckerError, ValueError):
    pass


class TooLarge(QTuckerError, ValueError):
    pass


class GaugeIdentityViolation(QTuckerError, ArithmeticError):
    """The gauged core does not overlap |0...0> by the attained alpha.

    This indicates a numerical or logic bug, never a user error.
    """
