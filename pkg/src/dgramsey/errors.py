"""Exception hierarchy shared by every module."""


class DGRamseyError(Exception):
    """Base class for all library errors."""


class InvalidGraph(DGRamseyError):
    pass


class DisconnectedGraph(InvalidGraph):
    pass


class GlueMismatch(InvalidGraph):
    pass


class InvalidDescriptor(DGRamseyError):
    pass


class ToleranceNonpositive(DGRamseyError):
    pass


class EmptySphere(DGRamseyError):
    pass


class DegenerateConstraints(DGRamseyError):
    pass


class DegenerateBase(DGRamseyError):
    pass


class FoldInfeasible(DGRamseyError):
    pass


class ImproperGraph(DGRamseyError):
    pass


class KernelTooFine(DGRamseyError):
    pass


class WindowTooFine(DGRamseyError):
    pass


class ScaleTooFine(DGRamseyError):
    pass


class IncompatibleScale(DGRamseyError):
    pass


class ChainExhausted(DGRamseyError):
    pass


class LambdaOutsideWindow(DGRamseyError):
    pass


class IndexOutOfRange(DGRamseyError):
    pass


class ScaleViolation(DGRamseyError):
    pass


class BudgetZero(DGRamseyError):
    pass


class ConfigError(DGRamseyError):
    pass
