"""
Orchestrator for multi-initialization NPG sweeps.
"""

import json
import time
from concurrent.futures import ProcessPoolExecutor
from functools import wraps
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from npg_lab.exceptions import ConfigError, DomainError
from npg_lab.geometry import parse_potential
from npg_lab.harness.interfaces import (
    ExperimentConfig,
    PredictedRate,
    RunResult,
    SweepJob,
    SweepResult,
)
from npg_lab.harness.services import (
    controller_for,
    csv_name,
    predicted_rate,
    random_initializations,
    run_job,
    stop_for,
    summarize,
    write_trajectory_csv,
)
from npg_lab.mdp_core import Mdp, load_mdp
from npg_lab.npg import GeometrySpec, Objective, parse_geometry
from npg_lab.oracle import enumerate_optimum, regularized_optimum
from npg_lab.utils.logging import StructuredLogger


def log_step(step_type: str) -> Callable:
    """
    Decorator to log the start and completion of a sweep stage.

    Args:
        step_type: Type of step being logged
    """

    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs):
            logger = StructuredLogger(__name__)
            logger.info(f"Starting {func.__name__}", step_type=step_type, action="start")
            start_time = time.time()
            result = func(*args, **kwargs)
            logger.info(
                f"Completed {func.__name__}",
                step_type=step_type,
                action="complete",
                elapsed=f"{time.time() - start_time:.2f}s",
            )
            return result

        return wrapper

    return decorator


class ExperimentOrchestrator:
    """
    Runs every (method, initialization) pair of a sweep and writes the results.

    Jobs are independent; with ``workers > 1`` they run in a process pool and
    only the parent process writes files.
    """

    def __init__(self, cfg: ExperimentConfig) -> None:
        self.cfg = cfg
        self.logger = StructuredLogger(__name__)
        self.mdp: Mdp = load_mdp(cfg.mdp_path)
        self.geometries: Dict[str, GeometrySpec] = {}
        self.predictions: Dict[str, PredictedRate] = {}
        self.optimum: Optional[float] = None
        for method in cfg.methods:
            try:
                geo = parse_geometry(method, self.mdp.shape)
                self.geometries[method] = geo
                self.predictions[method] = predicted_rate(geo, cfg.lam)
            except DomainError as e:
                raise ConfigError(f"invalid method {method!r}: {e}") from e
        try:
            regularizer = (
                parse_potential(cfg.regularizer, self.mdp.shape) if cfg.regularizer else None
            )
            self.objective = Objective(cfg.lam, regularizer)
        except DomainError as e:
            raise ConfigError(f"invalid regularizer {cfg.regularizer!r}: {e}") from e

    @log_step("oracle")
    def reference(self) -> Tuple[float, np.ndarray]:
        """Optimal value and maximizer the gaps are measured against."""
        if self.objective.is_regularized:
            eta, value = regularized_optimum(
                self.mdp, self.objective.regularizer, self.objective.lam
            )
            return value, eta.eta
        result = enumerate_optimum(self.mdp)
        return result.optimal_value, result.eta_star.eta

    @log_step("setup")
    def prepare(self) -> List[SweepJob]:
        """Build one job per method and shared initialization."""
        optimum, eta_star = self.reference()
        inits = random_initializations(self.cfg.n_inits, self.mdp.shape, self.cfg.seed)
        jobs = []
        for method, geo in self.geometries.items():
            controller = controller_for(self.cfg, method)
            stop = stop_for(self.cfg, method)
            for index, theta in enumerate(inits):
                jobs.append(
                    SweepJob(
                        method=method,
                        index=index,
                        mdp=self.mdp,
                        geometry=geo,
                        objective=self.objective,
                        controller=controller,
                        stop=stop,
                        theta0=theta.theta,
                        optimum=optimum,
                        eta_star=eta_star,
                    )
                )
        self.optimum = optimum
        self.logger.info("Prepared sweep", jobs=len(jobs), optimal_value=optimum)
        return jobs

    @log_step("integrate")
    def execute(self, jobs: List[SweepJob]) -> List[RunResult]:
        if self.cfg.workers == 1:
            return [run_job(job) for job in jobs]
        with ProcessPoolExecutor(max_workers=self.cfg.workers) as pool:
            return list(pool.map(run_job, jobs))

    @log_step("report")
    def write_outputs(self, results: List[RunResult]) -> SweepResult:
        out = Path(self.cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_paths = [
            write_trajectory_csv(
                res.trajectory,
                out / csv_name(res.method, res.index),
                self.mdp.n_states,
                self.mdp.n_actions,
            )
            for res in results
            if res.trajectory is not None
        ]
        summary = summarize(self.cfg, self.optimum, self.predictions, results)
        summary_path = out / "summary.json"
        summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        return SweepResult(summary=summary, summary_path=summary_path, csv_paths=tuple(csv_paths))

    def run(self) -> SweepResult:
        """
        Run the sweep end to end.

        Returns:
            SweepResult: The summary document and the paths written
        """
        self.logger.set_context(mdp=self.cfg.mdp_path, seed=self.cfg.seed)
        try:
            jobs = self.prepare()
            results = self.execute(jobs)
            result = self.write_outputs(results)
        finally:
            self.logger.clear_context()
        for method, entry in result.summary["methods"].items():
            self.logger.info(
                "Method summary",
                method=method,
                statuses=entry["status_counts"],
                matching=entry["matching_fraction"],
            )
        return result
