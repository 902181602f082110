"""
Type definitions for flow integration and Newton iterations.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from npg_lab.exceptions import DomainError
from npg_lab.mdp_core import StateActionFrequency
from npg_lab.utils.config import (
    DEFAULT_BASE_DT,
    DEFAULT_GAP_TOL,
    DEFAULT_GRAD_TOL,
    DEFAULT_MAX_ETA_STEP,
    DEFAULT_MAX_ITERS,
    DEFAULT_MAX_PARAM_STEP,
    DEFAULT_MIN_DT,
)


@dataclass(frozen=True)
class StepController:
    """
    Adaptive step size Δt = min(base_dt, max_param_step/‖dθ‖, max_eta_step/‖dη‖).

    Attributes:
        base_dt: Upper bound on the step size
        max_param_step: Cap on the norm of the update in θ
        max_eta_step: Cap on the predicted norm of the update in η
        min_dt: Floor for step halving
    """

    base_dt: float = DEFAULT_BASE_DT
    max_param_step: float = DEFAULT_MAX_PARAM_STEP
    max_eta_step: float = DEFAULT_MAX_ETA_STEP
    min_dt: float = DEFAULT_MIN_DT

    def __post_init__(self) -> None:
        if min(self.base_dt, self.max_param_step, self.max_eta_step, self.min_dt) <= 0.0:
            raise DomainError("step controller values must be positive")
        if self.min_dt > self.base_dt:
            raise DomainError("min_dt must not exceed base_dt")


@dataclass(frozen=True)
class StopCriteria:
    max_iters: int = DEFAULT_MAX_ITERS
    gap_tol: float = DEFAULT_GAP_TOL
    grad_tol: float = DEFAULT_GRAD_TOL

    def __post_init__(self) -> None:
        if self.max_iters < 0:
            raise DomainError("max_iters must be nonnegative")


class FlowStatus(str, Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"
    BOUNDARY_HIT = "BoundaryHit"
    DIVERGED = "Diverged"


@dataclass(frozen=True)
class TrajectoryRecord:
    """
    One point of a discretized flow.

    Attributes:
        t: Accumulated time Σ Δt_k
        theta: Flat softmax parameters
        eta: Flat state-action frequency
        pi: Flat policy
        reward: Objective value R_λ at this point
        gap: Optimal value minus reward, when the optimum is known
        bregman: Conditional-entropy Bregman distance from the optimum, when known
    """

    t: float
    theta: np.ndarray
    eta: np.ndarray
    pi: np.ndarray
    reward: float
    gap: Optional[float] = None
    bregman: Optional[float] = None


@dataclass(frozen=True)
class Trajectory:
    """
    A discretized flow and how it ended.

    Attributes:
        records: Recorded points, t strictly increasing
        status: Termination status; BoundaryHit is kept once a face was reached
        face: (state, action) coordinates snapped onto the boundary, in order
        t_hit: Accumulated time of the first boundary hit
        iterations: Number of accepted Euler steps
        message: Human-readable reason for termination
    """

    records: Tuple[TrajectoryRecord, ...]
    status: FlowStatus
    face: Tuple[Tuple[int, int], ...] = ()
    t_hit: Optional[float] = None
    iterations: int = 0
    message: str = ""

    def times(self) -> np.ndarray:
        return np.array([rec.t for rec in self.records])

    def gaps(self) -> np.ndarray:
        return np.array(
            [np.nan if rec.gap is None else rec.gap for rec in self.records]
        )

    def rewards(self) -> np.ndarray:
        return np.array([rec.reward for rec in self.records])

    @property
    def final(self) -> TrajectoryRecord:
        return self.records[-1]


@dataclass(frozen=True)
class ProjectedNewtonStep:
    """
    Result of one projected Newton step in state-action space.

    Attributes:
        eta: The new iterate
        direction_norm: Norm of the full (undamped) Newton direction
        damped: Whether the step was shortened to stay in the positive orthant
    """

    eta: StateActionFrequency
    direction_norm: float
    damped: bool = False


@dataclass(frozen=True)
class NewtonReport:
    """
    Convergence record of the regularized NPG iteration.

    Attributes:
        iterates: State-action iterates η_k
        errors: ‖η_k - η*_λ‖ against the projected Newton fixed point
        quadratic_flag: Whether e_{k+1} <= C e_k² held on the observed tail
        tail_constant: The fitted constant C, if enough pairs were measurable
        diverged: Whether the errors grew for 10 consecutive iterations
        deviations: ‖Δη_NPG - Δη_Newton‖ per iteration
        gradient_norms: Euclidean norm of the projected gradient per iteration
        step_size: The step size Δt used
    """

    iterates: Tuple[np.ndarray, ...]
    errors: Tuple[float, ...]
    quadratic_flag: bool
    tail_constant: Optional[float] = None
    diverged: bool = False
    deviations: Tuple[float, ...] = field(default_factory=tuple)
    gradient_norms: Tuple[float, ...] = field(default_factory=tuple)
    step_size: float = 0.0
