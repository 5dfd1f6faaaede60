"""
Confluent SUSY Toolkit - Errors
Exception hierarchy shared by the numerical modules and the CLI
"""

from typing import List, Optional, Tuple

Bracket = Tuple[float, float]


class ConfluentSUSYError(Exception):
    """Base class for every toolkit error"""


class ConfigError(ConfluentSUSYError, ValueError):
    """Run configuration could not be parsed or is inconsistent"""


class DomainError(ConfluentSUSYError, ValueError):
    """Evaluation requested outside the valid domain of a potential"""


class PreconditionError(ConfluentSUSYError, ValueError):
    """Inputs violate an operation precondition (missing derivatives, E = lambda, ...)"""


class UnsupportedError(ConfluentSUSYError, NotImplementedError):
    """Requested variant is not available (closed forms beyond u3, non-parametric seeds)"""


class NotSquareIntegrableError(ConfluentSUSYError, ValueError):
    """Function does not decay at the grid ends and cannot be normalized"""


class NumericalAccuracyError(ConfluentSUSYError, ArithmeticError):
    """A residual check exceeded its tolerance"""

    def __init__(self, message: str, residuals: Optional[dict] = None):
        super().__init__(message)
        self.residuals = residuals or {}


class BlowUpError(ConfluentSUSYError, ArithmeticError):
    """Initial-value integration overflowed"""

    def __init__(self, x: float, magnitude: float = float("inf")):
        super().__init__(f"IVP solution blew up at x={x:.6g} (|y|={magnitude:.3g})")
        self.x = x
        self.magnitude = magnitude


class SingularityError(ConfluentSUSYError, ArithmeticError):
    """A denominator (usually a Wronskian) vanishes or changes sign on the grid"""

    def __init__(self, message: str, brackets: Optional[List[Bracket]] = None):
        self.brackets = list(brackets or [])
        if self.brackets:
            shown = ", ".join(f"[{a:.6g}, {b:.6g}]" for a, b in self.brackets[:5])
            message = f"{message}; zero brackets: {shown}"
        super().__init__(message)
