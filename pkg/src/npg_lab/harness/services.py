"""
Experiment sweeps: seeded initializations, rate fits and plot-ready output.
"""

import csv
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from collections import Counter
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import linregress

from npg_lab.dynamics import (
    FlowStatus,
    StepController,
    StopCriteria,
    Trajectory,
    integrate_flow,
)
from npg_lab.exceptions import ConfigError, InsufficientDataError, NpgLabError
from npg_lab.geometry import ConditionalEntropyPotential, SigmaPotential
from npg_lab.harness.interfaces import (
    ExperimentConfig,
    PredictedRate,
    RateFit,
    RateModel,
    RunResult,
    SweepJob,
    SweepResult,
)
from npg_lab.npg import (
    GeometrySpec,
    HessianOf,
    Kakade,
    Morimura,
    Sigma,
    SoftmaxParams,
    Vanilla,
)
from npg_lab.utils.config import FIT_FLOOR, FIT_MIN_POINTS
from npg_lab.utils.logging import StructuredLogger

logger = StructuredLogger(__name__)

TRANSIENT_FRACTION = 0.1
FINITE_TIME_GAP = 1e-6
MIN_R_SQUARED = 0.98
MAX_EXPONENTIAL_SLOPE = -0.01
SLOPE_TOLERANCE = 0.3

_TOP_LEVEL_KEYS = {
    "mdp_path",
    "methods",
    "lambda",
    "regularizer",
    "n_inits",
    "seed",
    "output_dir",
    "workers",
    "controller",
    "stop",
    "overrides",
}
_CONTROLLER_KEYS = {f.name for f in fields(StepController)}
_STOP_KEYS = {f.name for f in fields(StopCriteria)}


def _build(kind, table: Dict[str, Any], allowed: set, base=None):
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown {kind.__name__} keys: {sorted(unknown)}")
    values = {} if base is None else {name: getattr(base, name) for name in allowed}
    values.update(table)
    try:
        return kind(**values)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid {kind.__name__}: {e}") from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Load an experiment configuration from TOML.

    Relative ``mdp_path`` and ``output_dir`` resolve against the directory of
    the config file; ``builtin:`` MDP paths are left alone.

    Raises:
        ConfigError: If the file is missing, malformed or inconsistent
    """
    path = Path(path)
    try:
        with path.open("rb") as f:
            doc = tomllib.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML in {path}: {e}") from e

    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "mdp_path" not in doc or "methods" not in doc:
        raise ConfigError("config needs mdp_path and methods")

    root = path.parent
    mdp_path = str(doc["mdp_path"])
    if not mdp_path.startswith("builtin:") and not Path(mdp_path).is_absolute():
        mdp_path = str(root / mdp_path)
    output_dir = Path(doc.get("output_dir", "runs"))
    if not output_dir.is_absolute():
        output_dir = root / output_dir

    overrides = doc.get("overrides", {})
    for method, table in overrides.items():
        unknown = set(table) - _CONTROLLER_KEYS - _STOP_KEYS
        if unknown:
            raise ConfigError(f"unknown override keys for {method}: {sorted(unknown)}")

    cfg = ExperimentConfig(
        mdp_path=mdp_path,
        methods=tuple(str(name) for name in doc["methods"]),
        lam=float(doc.get("lambda", 0.0)),
        regularizer=doc.get("regularizer"),
        n_inits=int(doc.get("n_inits", 30)),
        seed=int(doc.get("seed", 0)),
        controller=_build(StepController, doc.get("controller", {}), _CONTROLLER_KEYS),
        stop=_build(StopCriteria, doc.get("stop", {}), _STOP_KEYS),
        output_dir=output_dir,
        workers=int(doc.get("workers", 1)),
        overrides=overrides,
    )
    logger.debug("Loaded config", path=str(path), methods=list(cfg.methods))
    return cfg


def controller_for(cfg: ExperimentConfig, method: str) -> StepController:
    table = {k: v for k, v in cfg.overrides.get(method, {}).items() if k in _CONTROLLER_KEYS}
    return _build(StepController, table, _CONTROLLER_KEYS, base=cfg.controller)


def stop_for(cfg: ExperimentConfig, method: str) -> StopCriteria:
    table = {k: v for k, v in cfg.overrides.get(method, {}).items() if k in _STOP_KEYS}
    return _build(StopCriteria, table, _STOP_KEYS, base=cfg.stop)


def random_initializations(
    n: int, dims: Tuple[int, int], seed: int
) -> List[SoftmaxParams]:
    """
    Draw ``n`` parameter matrices with i.i.d. standard normal entries.

    The same seed always yields the same list, so every method of a sweep
    starts from identical points.
    """
    if n < 1:
        raise ConfigError("need at least one initialization")
    draws = np.random.default_rng(seed).standard_normal((n, *dims))
    return [SoftmaxParams(theta) for theta in draws]


def fit_gap_curve(
    t: Sequence[float],
    gap: Sequence[float],
    model: RateModel,
    floor: float = FIT_FLOOR,
    min_points: int = FIT_MIN_POINTS,
) -> RateFit:
    """
    Fit a decay model to an optimality-gap curve.

    The window skips the first 10% of the points and ends before the gap
    first drops below ``floor``.

    Args:
        t: Times, increasing
        gap: Optimality gaps at those times
        model: ``EXPONENTIAL`` regresses log gap on t, ``POWER_LAW`` on log t
        floor: Numerical floor of the gap
        min_points: Minimum window size

    Raises:
        InsufficientDataError: If fewer than ``min_points`` points remain
    """
    if model is RateModel.FINITE_TIME:
        raise InsufficientDataError("finite-time convergence has no slope to fit")
    t = np.asarray(t, dtype=np.float64)
    gap = np.asarray(gap, dtype=np.float64)
    start = int(math.ceil(TRANSIENT_FRACTION * t.size))
    usable = np.isfinite(gap) & (gap >= floor)
    if model is RateModel.POWER_LAW:
        usable &= t > 0.0
    stop = start
    while stop < t.size and usable[stop]:
        stop += 1
    if stop - start < min_points:
        raise InsufficientDataError(
            f"{stop - start} points in the fit window, need {min_points}"
        )

    x = t[start:stop] if model is RateModel.EXPONENTIAL else np.log(t[start:stop])
    result = linregress(x, np.log(gap[start:stop]))
    return RateFit(
        model=model,
        slope=float(result.slope),
        intercept=float(result.intercept),
        r_squared=float(result.rvalue**2),
        window=(start, stop),
    )


def fit_rate(traj: Trajectory, model: RateModel) -> RateFit:
    """Fit a decay model to the gap column of a trajectory."""
    return fit_gap_curve(traj.times(), traj.gaps(), model)


def predicted_rate(geo: GeometrySpec, lam: float = 0.0) -> PredictedRate:
    """
    Theoretical decay of the optimality gap along the flow of a geometry.

    Regularized flows converge linearly for every Legendre geometry; without
    regularization the rate depends on σ: exponential at σ = 1 (and for
    Kakade), t^(-1/(σ-1)) above, finite time below, t^(-1) for vanilla PG.
    """
    if isinstance(geo, Vanilla):
        if lam > 0.0:
            return PredictedRate(RateModel.EXPONENTIAL)
        return PredictedRate(RateModel.POWER_LAW, -1.0)
    if isinstance(geo, (Kakade, Morimura)):
        return PredictedRate(RateModel.EXPONENTIAL)
    if isinstance(geo, HessianOf):
        if isinstance(geo.phi, ConditionalEntropyPotential):
            return PredictedRate(RateModel.EXPONENTIAL)
        if not isinstance(geo.phi, SigmaPotential):
            raise ConfigError(f"no predicted rate for {geo.name}")
        sigma = geo.phi.sigma
    elif isinstance(geo, Sigma):
        sigma = geo.sigma
    else:
        raise ConfigError(f"no predicted rate for {geo!r}")

    if sigma < 1.0:
        return PredictedRate(RateModel.FINITE_TIME)
    if lam > 0.0 or sigma == 1.0:
        return PredictedRate(RateModel.EXPONENTIAL)
    return PredictedRate(RateModel.POWER_LAW, -1.0 / (sigma - 1.0))


def assess_trajectory(
    traj: Trajectory, prediction: PredictedRate
) -> Tuple[Optional[RateFit], bool]:
    """
    Check a trajectory against its predicted rate.

    Returns:
        Tuple[Optional[RateFit], bool]: The fit (None for finite time or too
        little data) and whether the prediction was matched
    """
    if prediction.model is RateModel.FINITE_TIME:
        gap = traj.final.gap if traj.records else None
        matched = (
            traj.status is FlowStatus.BOUNDARY_HIT
            and gap is not None
            and gap <= FINITE_TIME_GAP
        )
        return None, matched
    try:
        fit = fit_rate(traj, prediction.model)
    except InsufficientDataError as e:
        logger.debug("Rate fit skipped", reason=str(e))
        return None, False
    if prediction.model is RateModel.EXPONENTIAL:
        matched = fit.r_squared >= MIN_R_SQUARED and fit.slope < MAX_EXPONENTIAL_SLOPE
    else:
        matched = abs(fit.slope - prediction.slope) <= SLOPE_TOLERANCE
    return fit, matched


def run_job(job: SweepJob) -> RunResult:
    """Integrate one (method, initialization) pair; failures are captured, not raised."""
    try:
        traj = integrate_flow(
            job.mdp,
            SoftmaxParams(job.theta0),
            job.geometry,
            job.objective,
            job.controller,
            job.stop,
            optimum=job.optimum,
            eta_star=job.eta_star,
        )
        fit, matched = assess_trajectory(
            traj, predicted_rate(job.geometry, job.objective.lam)
        )
    except (NpgLabError, ArithmeticError, ValueError, np.linalg.LinAlgError) as e:
        logger.warning("Sweep job failed", method=job.method, init=job.index, error=str(e))
        return RunResult(method=job.method, index=job.index, error=str(e))
    logger.info(
        "Trajectory finished",
        method=job.method,
        init=job.index,
        status=traj.status.value,
        iterations=traj.iterations,
    )
    return RunResult(
        method=job.method, index=job.index, trajectory=traj, fit=fit, matched=matched
    )


def trajectory_header(n_states: int, n_actions: int) -> List[str]:
    pairs = [f"{s}_{a}" for s in range(n_states) for a in range(n_actions)]
    return (
        ["t"]
        + [f"theta_{p}" for p in pairs]
        + [f"eta_{p}" for p in pairs]
        + [f"pi_{p}" for p in pairs]
        + ["reward", "gap"]
    )


def write_trajectory_csv(
    traj: Trajectory, path: Union[str, Path], n_states: int, n_actions: int
) -> Path:
    """
    Write a trajectory as CSV with columns t, theta_*, eta_*, pi_*, reward, gap.

    Floats are written with ``repr`` precision so identical runs produce
    identical bytes.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(trajectory_header(n_states, n_actions))
        for rec in traj.records:
            writer.writerow(
                [repr(float(rec.t))]
                + [repr(float(v)) for v in rec.theta]
                + [repr(float(v)) for v in rec.eta]
                + [repr(float(v)) for v in rec.pi]
                + [repr(float(rec.reward)), "" if rec.gap is None else repr(float(rec.gap))]
            )
    return path


def csv_name(method: str, index: int) -> str:
    slug = "".join(ch if ch.isalnum() or ch in "-." else "_" for ch in method)
    return f"{slug}_init{index:03d}.csv"


def summarize(
    cfg: ExperimentConfig,
    optimal_value: float,
    predictions: Dict[str, PredictedRate],
    results: Sequence[RunResult],
) -> Dict[str, Any]:
    """
    Build the JSON summary of a sweep.

    Per method: status counts, the predicted rate, every fit, the fraction of
    initializations matching the prediction and any job failures.
    """
    methods: Dict[str, Any] = {}
    for method in cfg.methods:
        runs = [res for res in results if res.method == method]
        statuses = Counter(
            res.trajectory.status.value if res.trajectory else "Failed" for res in runs
        )
        prediction = predictions[method]
        methods[method] = {
            "predicted": {"model": prediction.model.value, "slope": prediction.slope},
            "status_counts": dict(sorted(statuses.items())),
            "fits": [
                {
                    "init": res.index,
                    "slope": res.fit.slope,
                    "intercept": res.fit.intercept,
                    "r_squared": res.fit.r_squared,
                    "window": list(res.fit.window),
                }
                for res in runs
                if res.fit is not None
            ],
            "t_hit": [
                res.trajectory.t_hit
                for res in runs
                if res.trajectory is not None and res.trajectory.t_hit is not None
            ],
            "final_gaps": [
                res.trajectory.final.gap if res.trajectory and res.trajectory.records else None
                for res in runs
            ],
            "matching_fraction": sum(res.matched for res in runs) / max(len(runs), 1),
            "failures": [
                {"init": res.index, "error": res.error} for res in runs if res.error
            ],
        }
    return {
        "mdp_path": cfg.mdp_path,
        "optimal_value": optimal_value,
        "lambda": cfg.lam,
        "regularizer": cfg.regularizer,
        "n_inits": cfg.n_inits,
        "seed": cfg.seed,
        "methods": methods,
    }


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    """
    Run every method of a config from the shared initializations.

    Writes one CSV per (method, initialization) and ``summary.json`` into
    ``cfg.output_dir``. Failed trajectories are recorded in the summary.

    Raises:
        ConfigError: If a method or the regularizer cannot be parsed
        MdpValidationError: If the MDP file is invalid
    """
    # imported here because the orchestrator builds on this module
    from npg_lab.orchestrator import ExperimentOrchestrator

    return ExperimentOrchestrator(cfg).run()
