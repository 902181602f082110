from .interfaces import (
    FlowStatus,
    NewtonReport,
    ProjectedNewtonStep,
    StepController,
    StopCriteria,
    Trajectory,
    TrajectoryRecord,
)
from .services import (
    inexact_newton_deviation,
    integrate_flow,
    newton_fixed_point,
    newton_step_size,
    projected_gradient_norm,
    projected_newton_step,
    quadratic_tail,
    regularized_npg_newton,
    riemannian_flow_step_state_action,
)

__all__ = [
    "FlowStatus",
    "NewtonReport",
    "ProjectedNewtonStep",
    "StepController",
    "StopCriteria",
    "Trajectory",
    "TrajectoryRecord",
    "inexact_newton_deviation",
    "integrate_flow",
    "newton_fixed_point",
    "newton_step_size",
    "projected_gradient_norm",
    "projected_newton_step",
    "quadratic_tail",
    "regularized_npg_newton",
    "riemannian_flow_step_state_action",
]
