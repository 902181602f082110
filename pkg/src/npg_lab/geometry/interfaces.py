"""
Type definitions for convex potentials and their Bregman divergences.

All potentials are stored as convex functions: negative entropy for σ = 1,
the log barrier for σ = 2, and the negative conditional entropy.
"""

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np


@dataclass(frozen=True)
class SigmaPotential:
    """
    Member of the σ-family of potentials.

    φ_σ(x) = Σ x log x for σ = 1, -Σ log x for σ = 2 and
    Σ x^(2-σ) / ((2-σ)(1-σ)) otherwise. Its Hessian is diag(x^(-σ)).
    """

    sigma: float

    @property
    def name(self) -> str:
        return f"sigma:{self.sigma:g}"


@dataclass(frozen=True)
class ConditionalEntropyPotential:
    """Negative conditional entropy φ_C(η) = Σ η(s,a) log(η(s,a) / ρ(s))."""

    n_states: int
    n_actions: int

    @property
    def name(self) -> str:
        return "conditional_entropy"


@dataclass(frozen=True)
class CustomPotential:
    """
    A user-supplied potential. Callbacks must be reentrant.

    Attributes:
        value: x -> float
        gradient: x -> vector
        hessian: x -> matrix
        label: Name used in logs and summaries
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    label: str = "custom"

    @property
    def name(self) -> str:
        return self.label


Potential = Union[SigmaPotential, ConditionalEntropyPotential, CustomPotential]


@dataclass(frozen=True)
class BregmanValue:
    """A Bregman divergence, possibly +inf at the boundary of the domain."""

    value: float

    @property
    def is_infinite(self) -> bool:
        return bool(np.isinf(self.value))

    def __float__(self) -> float:
        return float(self.value)
