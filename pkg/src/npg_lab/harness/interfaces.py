"""
Type definitions for experiment sweeps and rate fits.
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from npg_lab.dynamics import StepController, StopCriteria, Trajectory
from npg_lab.exceptions import ConfigError
from npg_lab.mdp_core import Mdp
from npg_lab.npg import GeometrySpec, Objective


class RateModel(str, Enum):
    EXPONENTIAL = "exponential"
    POWER_LAW = "power_law"
    FINITE_TIME = "finite_time"


@dataclass(frozen=True)
class RateFit:
    """
    Least-squares fit of log(gap) against t (exponential) or log t (power law).

    Attributes:
        model: The fitted model
        slope: Fitted slope; the decay constant or the power-law exponent
        intercept: Fitted intercept
        r_squared: Coefficient of determination on the window
        window: Half-open index range of the records used
    """

    model: RateModel
    slope: float
    intercept: float
    r_squared: float
    window: Tuple[int, int]


@dataclass(frozen=True)
class PredictedRate:
    """Theoretical decay of the optimality gap; ``slope`` is set for power laws only."""

    model: RateModel
    slope: Optional[float] = None


@dataclass(frozen=True)
class ExperimentConfig:
    """
    A multi-initialization sweep over NPG methods.

    Attributes:
        mdp_path: JSON file or ``builtin:<name>``
        methods: Geometry names such as ``kakade`` or ``sigma:1.5``
        lam: Regularization strength λ >= 0
        regularizer: Potential name, required when λ > 0
        n_inits: Number of random initializations shared by all methods
        seed: Seed of the initialization generator
        controller: Default step controller
        stop: Default stop criteria
        output_dir: Directory receiving CSV files and the summary
        workers: Worker processes; 1 runs in-process
        overrides: Per-method controller or stop keys, keyed by method name
    """

    mdp_path: str
    methods: Tuple[str, ...]
    lam: float = 0.0
    regularizer: Optional[str] = None
    n_inits: int = 30
    seed: int = 0
    controller: StepController = field(default_factory=StepController)
    stop: StopCriteria = field(default_factory=StopCriteria)
    output_dir: Path = Path("runs")
    workers: int = 1
    overrides: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.methods:
            raise ConfigError("methods must not be empty")
        if self.n_inits < 1:
            raise ConfigError("n_inits must be at least 1")
        if self.lam < 0.0:
            raise ConfigError("lambda must be nonnegative")
        if self.lam > 0.0 and not self.regularizer:
            raise ConfigError("a positive lambda needs a regularizer")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        unknown = set(self.overrides) - set(self.methods)
        if unknown:
            raise ConfigError(f"overrides for unknown methods: {sorted(unknown)}")


@dataclass(frozen=True)
class SweepJob:
    """One (method, initialization) integration, self-contained for a worker process."""

    method: str
    index: int
    mdp: Mdp
    geometry: GeometrySpec
    objective: Objective
    controller: StepController
    stop: StopCriteria
    theta0: np.ndarray
    optimum: float
    eta_star: np.ndarray


@dataclass(frozen=True)
class RunResult:
    """
    Outcome of one sweep job.

    Attributes:
        method: Geometry name
        index: Initialization index
        trajectory: The integrated trajectory, None if the job failed
        fit: Rate fit against the predicted model, when one applies
        matched: Whether the trajectory shows the predicted rate
        error: Failure message of a job that raised
    """

    method: str
    index: int
    trajectory: Optional[Trajectory] = None
    fit: Optional[RateFit] = None
    matched: bool = False
    error: Optional[str] = None


@dataclass(frozen=True)
class SweepResult:
    """Container for the outputs of a sweep."""

    summary: Dict[str, Any]
    summary_path: Path
    csv_paths: Tuple[Path, ...]
