"""
Type definitions for softmax parameters, NPG geometries and objectives.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from npg_lab.exceptions import DomainError
from npg_lab.geometry import Potential


@dataclass(frozen=True)
class SoftmaxParams:
    """Tabular softmax parameters θ of shape (S, A)."""

    theta: np.ndarray

    def __post_init__(self) -> None:
        theta = np.array(self.theta, dtype=np.float64, copy=True)
        if theta.ndim != 2:
            raise DomainError(f"theta must be a matrix, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise DomainError("theta has non-finite entries")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def flat(self) -> np.ndarray:
        return self.theta.reshape(-1)

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> "SoftmaxParams":
        return cls(np.zeros((n_states, n_actions)))


@dataclass(frozen=True)
class Vanilla:
    """Euclidean geometry in parameter space (plain policy gradient)."""

    @property
    def name(self) -> str:
        return "vanilla"


@dataclass(frozen=True)
class Kakade:
    """State-averaged Fisher information of the policy."""

    @property
    def name(self) -> str:
        return "kakade"


@dataclass(frozen=True)
class Morimura:
    """Fisher information of the state-action distribution."""

    @property
    def name(self) -> str:
        return "morimura"


@dataclass(frozen=True)
class Sigma:
    """Pullback of the σ-Hessian metric diag(η^(-σ))."""

    sigma: float

    @property
    def name(self) -> str:
        return f"sigma:{self.sigma:g}"


@dataclass(frozen=True)
class HessianOf:
    """Pullback of the Hessian metric of an arbitrary potential."""

    phi: Potential

    @property
    def name(self) -> str:
        return f"hessian:{self.phi.name}"


GeometrySpec = Union[Vanilla, Kakade, Morimura, Sigma, HessianOf]


@dataclass(frozen=True)
class Objective:
    """
    Regularized reward R_λ(η) = ⟨r, η⟩ - λ φ(η).

    Attributes:
        lam: Regularization strength, λ >= 0
        regularizer: The convex potential φ, required when λ > 0
    """

    lam: float = 0.0
    regularizer: Optional[Potential] = None

    def __post_init__(self) -> None:
        if self.lam < 0.0:
            raise DomainError(f"regularization strength must be >= 0, got {self.lam}")
        if self.lam > 0.0 and self.regularizer is None:
            raise DomainError("a positive regularization strength needs a regularizer")

    @property
    def is_regularized(self) -> bool:
        return self.lam > 0.0


class NpgTerms(NamedTuple):
    """Quantities shared by one NPG evaluation at a parameter."""

    eta: np.ndarray
    jacobian: np.ndarray
    gradient: np.ndarray
    gram: np.ndarray
    direction: np.ndarray
    policy: np.ndarray
