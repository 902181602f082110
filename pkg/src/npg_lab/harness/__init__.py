from .interfaces import (
    ExperimentConfig,
    PredictedRate,
    RateFit,
    RateModel,
    RunResult,
    SweepJob,
    SweepResult,
)
from .services import (
    assess_trajectory,
    controller_for,
    csv_name,
    fit_gap_curve,
    fit_rate,
    load_config,
    predicted_rate,
    random_initializations,
    run_job,
    run_sweep,
    stop_for,
    summarize,
    trajectory_header,
    write_trajectory_csv,
)

__all__ = [
    "ExperimentConfig",
    "PredictedRate",
    "RateFit",
    "RateModel",
    "RunResult",
    "SweepJob",
    "SweepResult",
    "assess_trajectory",
    "controller_for",
    "csv_name",
    "fit_gap_curve",
    "fit_rate",
    "load_config",
    "predicted_rate",
    "random_initializations",
    "run_job",
    "run_sweep",
    "stop_for",
    "summarize",
    "trajectory_header",
    "write_trajectory_csv",
]
