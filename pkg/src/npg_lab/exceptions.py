"""
Error types raised by npg-lab.

Validation problems derive from ``ValueError`` and numerical failures from
``ArithmeticError``; the CLI maps them to exit codes 1 and 2.
"""

from typing import Optional, Tuple


class NpgLabError(Exception):
    """Base class for all npg-lab errors."""


class MdpValidationError(NpgLabError, ValueError):
    """An MDP violates one of its invariants."""

    def __init__(self, message: str, field: str, index: Optional[Tuple[int, ...]] = None):
        self.field = field
        self.index = index
        where = f"{field}{list(index)}" if index is not None else field
        super().__init__(f"{message} ({where})")


class ZeroMarginalError(NpgLabError, ValueError):
    """A state-action frequency has a state with zero marginal."""

    def __init__(self, state: int):
        self.state = state
        super().__init__(f"state marginal vanishes at state {state}")


class DomainError(NpgLabError, ValueError):
    """A potential was evaluated outside its domain."""


class ScaleGuardError(NpgLabError, ValueError):
    """Exhaustive enumeration would exceed the configured limit."""


class InsufficientDataError(NpgLabError, ValueError):
    """Too few usable points to fit a convergence rate."""


class ConfigError(NpgLabError, ValueError):
    """An experiment configuration or CLI argument is invalid."""


class NumericalError(NpgLabError, ArithmeticError):
    """Base class for numerical failures."""


class SingularSystemError(NumericalError):
    """A linear system that should be regular is numerically singular."""


class BoundaryExitError(NumericalError):
    """A step would leave the positive orthant."""

    def __init__(self, coordinate: int, fraction: float):
        self.coordinate = coordinate
        self.fraction = fraction
        super().__init__(
            f"step leaves the positive orthant at coordinate {coordinate} "
            f"(feasible fraction {fraction:.3g})"
        )


class RegularizedOptimumError(NumericalError):
    """The reference Newton solver failed to reach a stationary point."""
