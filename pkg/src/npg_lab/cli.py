"""
Command-line entry point for npg-lab.

Exit codes: 0 on success, 1 on validation or usage errors, 2 on numerical
failures.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from npg_lab.dynamics import StepController, StopCriteria, regularized_npg_newton
from npg_lab.exceptions import ConfigError, MdpValidationError
from npg_lab.geometry import parse_potential
from npg_lab.harness import ExperimentConfig, load_config, run_sweep
from npg_lab.mdp_core import (
    Mdp,
    Policy,
    bellman_data,
    load_mdp,
    state_action_frequency,
    uniform_policy,
    validate_policy,
)
from npg_lab.npg import SoftmaxParams, parse_geometry, potential_of
from npg_lab.oracle import enumerate_optimum, regularized_optimum
from npg_lab.utils.config import LOG_DIR, LOG_LEVEL
from npg_lab.utils.logging import StructuredLogger, setup_logging

logger = StructuredLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        raise ConfigError(message)


def _print(doc: Dict[str, Any]) -> None:
    print(json.dumps(doc, indent=2))


def _load_policy(m: Mdp, path: Optional[str]) -> Policy:
    if path is None:
        return uniform_policy(m)
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise MdpValidationError(f"invalid JSON: {e}", "policy") from e
    probs = doc["probs"] if isinstance(doc, dict) else doc
    pi = Policy(np.asarray(probs, dtype=np.float64))
    validate_policy(m, pi)
    return pi


def cmd_solve(args: argparse.Namespace) -> int:
    m = load_mdp(args.mdp)
    pi = _load_policy(m, args.policy)
    eta = state_action_frequency(m, pi)
    data = bellman_data(m, pi)
    _print(
        {
            "eta": eta.matrix.tolist(),
            "rho": eta.rho.tolist(),
            "reward": float(m.r_flat @ eta.eta),
            "q": data.q.tolist(),
            "v": data.v.tolist(),
        }
    )
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    m = load_mdp(args.mdp)
    result = enumerate_optimum(m)
    doc: Dict[str, Any] = {
        "optimal_value": result.optimal_value,
        "is_unique": result.is_unique,
        "maximizers": [
            {"actions": list(actions), "eta": eta.matrix.tolist()}
            for actions, (_, eta) in zip(result.actions, result.maximizers)
        ],
    }
    if args.lam > 0.0:
        if not args.regularizer:
            raise ConfigError("--lambda needs --regularizer")
        phi = parse_potential(args.regularizer, m.shape)
        eta, value = regularized_optimum(m, phi, args.lam)
        doc["regularized"] = {
            "regularizer": phi.name,
            "lambda": args.lam,
            "value": value,
            "eta": eta.matrix.tolist(),
        }
    _print(doc)
    return 0


def cmd_flow(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig(
        mdp_path=args.mdp,
        methods=tuple(args.geometry),
        lam=args.lam,
        regularizer=args.regularizer,
        n_inits=args.inits,
        seed=args.seed,
        controller=StepController(base_dt=args.base_dt, max_param_step=args.max_step),
        stop=StopCriteria(
            max_iters=args.max_iters, gap_tol=args.gap_tol, grad_tol=args.grad_tol
        ),
        output_dir=Path(args.out),
        workers=args.workers,
    )
    result = run_sweep(cfg)
    _print(result.summary)
    return 0


def cmd_newton(args: argparse.Namespace) -> int:
    m = load_mdp(args.mdp)
    phi = potential_of(parse_geometry(args.geometry, m.shape), m.shape)
    if phi is None:
        raise ConfigError(f"geometry {args.geometry!r} has no potential")
    if args.lam <= 0.0:
        raise ConfigError("--lambda must be positive")
    report = regularized_npg_newton(
        m,
        SoftmaxParams.zeros(m.n_states, m.n_actions),
        phi,
        args.lam,
        max_iters=args.max_iters,
        step_size=args.step_size,
    )
    _print(
        {
            "potential": phi.name,
            "lambda": args.lam,
            "step_size": report.step_size,
            "step_size_rule": "1/lambda" if args.step_size is None else "given",
            "errors": list(report.errors),
            "deviations": list(report.deviations),
            "gradient_norms": list(report.gradient_norms),
            "quadratic_flag": report.quadratic_flag,
            "tail_constant": report.tail_constant,
            "diverged": report.diverged,
        }
    )
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    result = run_sweep(load_config(args.config))
    _print(result.summary)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="npg-lab", description="Natural policy gradient laboratory")
    parser.add_argument("--log-level", default=LOG_LEVEL)
    parser.add_argument("--log-dir", default=LOG_DIR)
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="state-action frequency and values of a policy")
    solve.add_argument("mdp")
    solve.add_argument("--policy", help="JSON policy matrix; uniform if omitted")
    solve.set_defaults(func=cmd_solve)

    oracle = sub.add_parser("oracle", help="exact optimum by enumeration")
    oracle.add_argument("mdp")
    oracle.add_argument("--lambda", dest="lam", type=float, default=0.0)
    oracle.add_argument("--regularizer")
    oracle.set_defaults(func=cmd_oracle)

    flow = sub.add_parser("flow", help="integrate NPG flows from random initializations")
    flow.add_argument("mdp")
    flow.add_argument("--geometry", action="append", required=True)
    flow.add_argument("--lambda", dest="lam", type=float, default=0.0)
    flow.add_argument("--regularizer")
    flow.add_argument("--inits", type=int, default=30)
    flow.add_argument("--seed", type=int, default=0)
    flow.add_argument("--out", default="runs")
    flow.add_argument("--workers", type=int, default=1)
    flow.add_argument("--max-iters", type=int, default=StopCriteria.max_iters)
    flow.add_argument("--gap-tol", type=float, default=StopCriteria.gap_tol)
    flow.add_argument("--grad-tol", type=float, default=StopCriteria.grad_tol)
    flow.add_argument("--base-dt", type=float, default=StepController.base_dt)
    flow.add_argument("--max-step", type=float, default=StepController.max_param_step)
    flow.set_defaults(func=cmd_flow)

    newton = sub.add_parser("newton", help="regularized NPG as inexact Newton")
    newton.add_argument("mdp")
    newton.add_argument("--geometry", required=True)
    newton.add_argument("--lambda", dest="lam", type=float, required=True)
    newton.add_argument("--max-iters", type=int, default=50)
    newton.add_argument(
        "--step-size", type=float, help="Euler step in θ; defaults to 1/lambda"
    )
    newton.set_defaults(func=cmd_newton)

    sweep = sub.add_parser("sweep", help="run a TOML experiment config")
    sweep.add_argument("config")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        print(f"npg-lab: {e}", file=sys.stderr)
        return 1
    setup_logging(args.log_level.upper(), args.log_dir)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as e:
        logger.error("Command failed", command=args.command, error=str(e))
        print(f"npg-lab: {e}", file=sys.stderr)
        return 1
    except ArithmeticError as e:
        logger.error("Numerical failure", command=args.command, error=str(e))
        print(f"npg-lab: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
