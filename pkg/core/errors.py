"""Exception hierarchy shared by the solver, the statistics toolkit and the CLI."""
from typing import Any, Optional, Sequence


class NSStatError(Exception):
    """Root of every error raised by this package."""


class LatticeError(NSStatError, ValueError):
    """Invalid lattice, or fields living on different lattices."""


class SymmetryViolationError(NSStatError, ValueError):
    """Coefficients are not Hermitian-symmetric, so they are not a real field."""


class BlowUpError(NSStatError, ArithmeticError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, step: int, message: Optional[str] = None, partial: Any = None):
        self.step = step
        self.partial = partial
        super().__init__(message or f"non-finite state at step {step}")


class PastingMismatchError(NSStatError, ValueError):
    def __init__(self, gap: float, message: Optional[str] = None):
        self.gap = gap
        super().__init__(message or f"trajectories do not meet: L2 gap {gap:.6g}")


class IntervalError(NSStatError, ValueError):
    """Access outside the interval a trajectory is defined on."""


class CoverageError(NSStatError, ValueError):
    """Not enough samples or time span for the requested averaging."""


class ShapeConstantsError(NSStatError, ValueError):
    pass


class TauConditionError(NSStatError, ValueError):
    pass


class NonFiniteObservableError(NSStatError, ValueError):
    pass


class ConfigError(NSStatError, ValueError):
    def __init__(self, message: str, fields: Sequence[str] = ()):
        self.fields = tuple(fields)
        super().__init__(message)
