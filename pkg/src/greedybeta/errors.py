"""Exception hierarchy shared by all modules."""
from __future__ import annotations


class GreedyBetaError(Exception):
    """Base class; ``code`` is the machine-readable name used by the CLI."""

    code = "Error"


class NonSquareFreeRadicand(GreedyBetaError, ValueError):
    code = "NonSquareFreeRadicand"


class NegativeRadicand(GreedyBetaError, ValueError):
    code = "NegativeRadicand"


class IncompatibleRadicands(GreedyBetaError, ValueError):
    code = "IncompatibleRadicands"


class DivisionByZero(GreedyBetaError, ZeroDivisionError):
    code = "DivisionByZero"


class NotAllowable(GreedyBetaError, ValueError):
    code = "NotAllowable"


class InvalidSystem(GreedyBetaError, ValueError):
    code = "InvalidSystem"


class OutOfDomain(GreedyBetaError, ValueError):
    code = "OutOfDomain"


class BoundaryAmbiguous(GreedyBetaError, ValueError):
    """Float backend: a point lies within tolerance of a cell boundary."""

    code = "BoundaryAmbiguous"


class EmptyTail(GreedyBetaError, ValueError):
    code = "EmptyTail"


class WrongCase(GreedyBetaError, ValueError):
    code = "WrongCase"


class InvalidWord(GreedyBetaError, ValueError):
    code = "InvalidWord"


class NotFull(GreedyBetaError, ValueError):
    code = "NotFull"


class DepthExceeded(GreedyBetaError, ValueError):
    code = "DepthExceeded"


class InvalidPoint(GreedyBetaError, ValueError):
    code = "InvalidPoint"


class BoundaryPoint(GreedyBetaError, ValueError):
    code = "BoundaryPoint"


class OrbitBudgetExceeded(GreedyBetaError, RuntimeError):
    code = "OrbitBudgetExceeded"


class NotEventuallyPeriodic(GreedyBetaError, ValueError):
    code = "NotEventuallyPeriodic"


class ZeroIntegral(GreedyBetaError, ValueError):
    code = "ZeroIntegral"
