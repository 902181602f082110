"""
Discrete-time NPG flows and Newton iterations.

Flows are integrated by explicit Euler in θ with an adaptive step. Geometries
whose flows reach the boundary in finite time (σ < 1) are followed onto the
faces they hit: the vanishing coordinate is pinned at probability zero and
integration continues inside the face.
"""

from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.special import logsumexp
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from npg_lab.dynamics.interfaces import (
    FlowStatus,
    NewtonReport,
    ProjectedNewtonStep,
    StepController,
    StopCriteria,
    Trajectory,
    TrajectoryRecord,
)
from npg_lab.exceptions import (
    BoundaryExitError,
    DomainError,
    NpgLabError,
    NumericalError,
    RegularizedOptimumError,
    SingularSystemError,
)
from npg_lab.geometry import (
    ConditionalEntropyPotential,
    Potential,
    SigmaPotential,
    bregman_divergence,
    potential_gradient,
    potential_hessian,
    potential_value,
    projected_riemannian_gradient,
)
from npg_lab.mdp_core import (
    Mdp,
    Policy,
    StateActionFrequency,
    constraint_matrix,
    state_action_frequency,
    state_kernel,
    tangent_basis,
    uniform_policy,
)
from npg_lab.npg import (
    GeometrySpec,
    HessianOf,
    NpgTerms,
    Objective,
    SoftmaxParams,
    eta_objective,
    may_hit_boundary,
    npg_terms,
    softmax_policy,
)
from npg_lab.utils.config import BOUNDARY_TOL, NEWTON_TOL, PINV_RTOL
from npg_lab.utils.logging import StructuredLogger

logger = StructuredLogger(__name__)

# exp(-800) underflows to exactly 0 in float64
SNAP_OFFSET = 800.0
DECREASE_SLACK = 1e-12
DIVERGENCE_RUN = 10
QUADRATIC_TARGET = 1e-12
QUADRATIC_TAIL = 3
QUADRATIC_MAX_CONSTANT = 1e3
NEWTON_DAMPINGS = (1.0, 0.5)
NEWTON_MAX_ITERS = 500
STATIONARITY_TOL = 1e-11
FEASIBLE_FRACTION = 0.99
ARMIJO = 1e-4
MIN_LINE_STEP = 1e-12

# failures of one evaluation that end a flow as Diverged
_FLOW_ERRORS = (NpgLabError, ArithmeticError, ValueError, linalg.LinAlgError)


def _vector(eta) -> np.ndarray:
    if isinstance(eta, StateActionFrequency):
        return eta.eta
    return np.asarray(eta, dtype=np.float64).reshape(-1)


# ---------------------------------------------------------------------------
# Flow integration
# ---------------------------------------------------------------------------


def _pin(theta: np.ndarray, pinned: np.ndarray) -> None:
    if not pinned.any():
        return
    free_max = np.where(pinned, -np.inf, theta).max(axis=1, keepdims=True)
    theta[pinned] = np.broadcast_to(free_max - SNAP_OFFSET, theta.shape)[pinned]


def _terms_finite(terms: NpgTerms) -> bool:
    return bool(
        np.all(np.isfinite(terms.gradient))
        and np.all(np.isfinite(terms.gram))
        and np.all(np.isfinite(terms.direction))
    )


def _numerical_rank(gram: np.ndarray) -> int:
    values = linalg.svdvals(gram)
    if values.size == 0 or values[0] == 0.0:
        return 0
    return int(np.sum(values > PINV_RTOL * values[0]))


def _face_candidates(
    m: Mdp, eta: np.ndarray, pinned: np.ndarray, gram: np.ndarray
) -> List[Tuple[int, int]]:
    matrix = eta.reshape(m.shape)
    free = ~pinned
    hits: List[Tuple[int, int]] = []
    for s in range(m.n_states):
        n_free = int(free[s].sum())
        if n_free < 2:
            continue
        low = [a for a in np.argsort(matrix[s]) if free[s, a] and matrix[s, a] < BOUNDARY_TOL]
        hits.extend((s, int(a)) for a in low[: n_free - 1])
    if hits:
        return hits

    structural_rank = int(np.sum(np.maximum(free.sum(axis=1) - 1, 0)))
    collapsed = not np.all(np.isfinite(gram)) or _numerical_rank(gram) < structural_rank
    if not collapsed:
        return []
    # the metric lost a direction: the smallest free coordinate is on its way out
    movable = free & (free.sum(axis=1, keepdims=True) >= 2)
    if not movable.any():
        return []
    flat = np.where(movable, matrix, np.inf).reshape(-1)
    index = int(np.argmin(flat))
    return [divmod(index, m.n_actions)]


def _objective_at(m: Mdp, theta: np.ndarray, obj: Objective) -> float:
    try:
        eta = state_action_frequency(m, softmax_policy(SoftmaxParams(theta))).eta
        return eta_objective(m, eta, obj)
    except _FLOW_ERRORS:
        return -np.inf


def _euler_step(
    m: Mdp,
    theta: np.ndarray,
    terms: NpgTerms,
    value: float,
    obj: Objective,
    ctrl: StepController,
    pinned: np.ndarray,
) -> Optional[Tuple[np.ndarray, float, float]]:
    direction = terms.direction.reshape(m.shape)
    dt = ctrl.base_dt
    param_rate = float(np.linalg.norm(direction))
    eta_rate = float(np.linalg.norm(terms.jacobian @ terms.direction))
    if param_rate > 0.0:
        dt = min(dt, ctrl.max_param_step / param_rate)
    if eta_rate > 0.0:
        dt = min(dt, ctrl.max_eta_step / eta_rate)

    while True:
        candidate = theta + dt * direction
        _pin(candidate, pinned)
        new_value = _objective_at(m, candidate, obj)
        if np.isfinite(new_value) and new_value >= value - DECREASE_SLACK:
            return candidate, dt, new_value
        if dt / 2.0 < ctrl.min_dt:
            if np.isfinite(new_value):
                logger.warning(
                    "Accepting a decreasing step at the step-size floor",
                    dt=dt,
                    decrease=value - new_value,
                )
                return candidate, dt, new_value
            return None
        dt /= 2.0


def _record(
    m: Mdp,
    t: float,
    theta: np.ndarray,
    eta: np.ndarray,
    pi: np.ndarray,
    value: float,
    optimum: Optional[float],
    eta_star: Optional[np.ndarray],
) -> TrajectoryRecord:
    bregman = None
    if eta_star is not None and np.all(eta > 0.0):
        phi = ConditionalEntropyPotential(m.n_states, m.n_actions)
        bregman = bregman_divergence(phi, eta_star, eta).value
    return TrajectoryRecord(
        t=t,
        theta=theta.reshape(-1).copy(),
        eta=eta.copy(),
        pi=pi.reshape(-1),
        reward=value,
        gap=None if optimum is None else optimum - value,
        bregman=bregman,
    )


def integrate_flow(
    m: Mdp,
    theta0: SoftmaxParams,
    geo: GeometrySpec,
    obj: Objective,
    ctrl: Optional[StepController] = None,
    stop: Optional[StopCriteria] = None,
    optimum: Optional[float] = None,
    eta_star: Optional[np.ndarray] = None,
) -> Trajectory:
    """
    Integrate the NPG flow ∂_t θ = G(θ)^+ ∇R_λ(θ) by explicit Euler.

    Args:
        m: The MDP
        theta0: Initial parameters
        geo: NPG geometry
        obj: Objective, possibly regularized
        ctrl: Adaptive step controller
        stop: Stop criteria
        optimum: Optimal objective value, enables gap tracking and the gap stop
        eta_star: Optimal state-action frequency, enables Bregman tracking

    Returns:
        Trajectory: Records in θ and η coordinates with a termination status.
        Numerical trouble is reported as ``Diverged``, never raised.
    """
    ctrl = ctrl or StepController()
    stop = stop or StopCriteria()
    boundary_aware = may_hit_boundary(geo)
    theta = np.array(theta0.theta, dtype=np.float64)
    pinned = np.zeros(m.shape, dtype=bool)
    face: List[Tuple[int, int]] = []
    t_hit: Optional[float] = None
    t = 0.0
    iterations = 0
    message = ""
    star = None if eta_star is None else _vector(eta_star)

    logger.debug("Starting flow", geometry=geo.name, lam=obj.lam)
    try:
        terms = npg_terms(m, SoftmaxParams(theta), geo, obj)
    except _FLOW_ERRORS as e:
        logger.warning("Flow could not start", geometry=geo.name, error=str(e))
        return Trajectory(records=(), status=FlowStatus.DIVERGED, message=str(e))
    value = eta_objective(m, terms.eta, obj)
    records = [_record(m, t, theta, terms.eta, terms.policy, value, optimum, star)]

    status = FlowStatus.MAX_ITERS
    for _ in range(stop.max_iters):
        gap = None if optimum is None else optimum - value
        if (gap is not None and gap <= stop.gap_tol) or np.linalg.norm(
            terms.gradient
        ) <= stop.grad_tol:
            status = FlowStatus.CONVERGED
            break
        if not _terms_finite(terms):
            status, message = FlowStatus.DIVERGED, "non-finite gradient or Gram matrix"
            break

        step = _euler_step(m, theta, terms, value, obj, ctrl, pinned)
        if step is None:
            status, message = FlowStatus.DIVERGED, "no finite step above min_dt"
            break
        theta, dt, value = step
        t += dt
        iterations += 1

        try:
            terms = npg_terms(m, SoftmaxParams(theta), geo, obj)
            if boundary_aware:
                snapped = _face_candidates(m, terms.eta, pinned, terms.gram)
                if snapped:
                    for s, a in snapped:
                        pinned[s, a] = True
                        face.append((s, a))
                    _pin(theta, pinned)
                    if t_hit is None:
                        t_hit = t
                    logger.info("Flow reached a face", geometry=geo.name, face=snapped, t=t)
                    terms = npg_terms(m, SoftmaxParams(theta), geo, obj)
                    value = eta_objective(m, terms.eta, obj)
        except _FLOW_ERRORS as e:
            status, message = FlowStatus.DIVERGED, str(e)
            break
        records.append(_record(m, t, theta, terms.eta, terms.policy, value, optimum, star))

    if face and status is not FlowStatus.DIVERGED:
        message = message or f"ended as {status.value} on a face"
        status = FlowStatus.BOUNDARY_HIT
    logger.debug(
        "Completed flow",
        geometry=geo.name,
        status=status.value,
        iterations=iterations,
        t=t,
    )
    return Trajectory(
        records=tuple(records),
        status=status,
        face=tuple(face),
        t_hit=t_hit,
        iterations=iterations,
        message=message,
    )


# ---------------------------------------------------------------------------
# State-action space steps
# ---------------------------------------------------------------------------


def _eta_gradient(m: Mdp, eta: np.ndarray, obj: Objective) -> np.ndarray:
    if not obj.is_regularized:
        return m.r_flat.copy()
    return m.r_flat - obj.lam * potential_gradient(obj.regularizer, eta)


def _check_positive(eta: np.ndarray, increment: np.ndarray) -> None:
    new = eta + increment
    if np.all(new > 0.0):
        return
    decreasing = increment < 0.0
    fractions = np.full(eta.size, np.inf)
    fractions[decreasing] = eta[decreasing] / -increment[decreasing]
    coordinate = int(np.argmin(fractions))
    raise BoundaryExitError(coordinate, float(fractions[coordinate]))


def riemannian_flow_step_state_action(
    m: Mdp, eta, phi: Potential, obj: Objective, dt: float
) -> StateActionFrequency:
    """
    One explicit Euler step of the Hessian gradient flow of φ on the polytope.

    The velocity is the g-orthogonal projection onto the tangent space of the
    Riemannian gradient ∇²φ(η)^(-1) ∇R_λ(η).

    Raises:
        BoundaryExitError: If the step leaves the positive orthant
    """
    if dt <= 0.0:
        raise DomainError("dt must be positive")
    vector = _vector(eta)
    velocity = projected_riemannian_gradient(m, vector, phi, _eta_gradient(m, vector, obj))
    increment = dt * velocity
    _check_positive(vector, increment)
    return StateActionFrequency(vector + increment, m.n_states, m.n_actions)


def _metric_scaled_basis(m: Mdp, eta: np.ndarray, phi: Potential) -> np.ndarray:
    # kernel basis orthonormal for the scaled problem; the Newton step does
    # not depend on which basis of the tangent space is used
    if isinstance(phi, SigmaPotential) and phi.sigma > 0.0:
        scale = np.power(eta, phi.sigma / 2.0)
    elif isinstance(phi, ConditionalEntropyPotential):
        scale = np.sqrt(eta)
    else:
        return tangent_basis(m)
    return scale[:, None] * linalg.null_space(constraint_matrix(m) * scale[None, :])


def _newton_direction(m: Mdp, eta: np.ndarray, phi: Potential, lam: float) -> np.ndarray:
    basis = _metric_scaled_basis(m, eta, phi)
    if basis.shape[1] == 0:
        return np.zeros(m.n_pairs)
    gradient = m.r_flat - lam * potential_gradient(phi, eta)
    reduced = basis.T @ (lam * potential_hessian(phi, eta)) @ basis
    reduced = 0.5 * (reduced + reduced.T)
    try:
        factor = linalg.cho_factor(reduced)
    except linalg.LinAlgError as e:
        raise SingularSystemError("reduced Hessian is not positive definite") from e
    pivots = np.abs(np.diag(factor[0]))
    if pivots.min() ** 2 <= np.finfo(float).eps * pivots.max() ** 2:
        raise SingularSystemError("reduced Hessian is numerically singular")
    return basis @ linalg.cho_solve(factor, basis.T @ gradient)


def projected_gradient_norm(m: Mdp, eta, phi: Potential, lam: float) -> float:
    """Norm of the Euclidean projection of ∇R_λ(η) onto the tangent space."""
    vector = _vector(eta)
    basis = tangent_basis(m)
    gradient = m.r_flat - lam * potential_gradient(phi, vector)
    return float(np.linalg.norm(basis.T @ gradient))


def projected_newton_step(
    m: Mdp, eta, phi: Potential, lam: float, damping: float = 1.0
) -> ProjectedNewtonStep:
    """
    Newton step for R_λ(η) = ⟨r, η⟩ - λ φ(η) on the affine hull of the polytope.

    Solves the reduced system (W^T λ∇²φ W) c = W^T ∇R_λ for a basis W of the
    tangent space and moves to η + W c. A step leaving the positive orthant is
    shortened to 0.99 of the largest feasible fraction.

    Args:
        m: The MDP
        eta: Interior state-action frequency
        phi: Regularizer with positive definite Hessian on the tangent space
        lam: Regularization strength, λ > 0
        damping: Factor applied to the Newton direction

    Raises:
        SingularSystemError: If the reduced Hessian is numerically singular
    """
    if lam <= 0.0:
        raise DomainError("projected Newton needs a positive regularization strength")
    vector = _vector(eta)
    direction = _newton_direction(m, vector, phi, lam)
    step = damping * direction
    damped = damping != 1.0
    if np.any(vector + step <= 0.0):
        decreasing = step < 0.0
        fraction = float(np.min(vector[decreasing] / -step[decreasing]))
        step = FEASIBLE_FRACTION * min(fraction, 1.0) * step
        damped = True
    return ProjectedNewtonStep(
        eta=StateActionFrequency(vector + step, m.n_states, m.n_actions),
        direction_norm=float(np.linalg.norm(direction)),
        damped=damped,
    )


def _iterate_newton(
    m: Mdp, start: np.ndarray, phi: Potential, lam: float, damping: float, tol: float
) -> StateActionFrequency:
    eta = StateActionFrequency(start, m.n_states, m.n_actions)
    for k in range(NEWTON_MAX_ITERS):
        try:
            residual = projected_gradient_norm(m, eta, phi, lam)
            if not np.isfinite(residual):
                raise RegularizedOptimumError("projected gradient is not finite")
            if residual <= tol:
                logger.debug("Newton reference converged", iterations=k, residual=residual)
                return eta
            step = projected_newton_step(m, eta, phi, lam, damping)
        except (NpgLabError, ValueError, linalg.LinAlgError) as e:
            if isinstance(e, RegularizedOptimumError):
                raise
            raise RegularizedOptimumError(f"Newton step failed: {e}") from e
        if not np.all(np.isfinite(step.eta.eta)):
            raise RegularizedOptimumError("Newton step is not finite")
        if not step.damped and step.direction_norm <= np.finfo(float).eps:
            if residual <= STATIONARITY_TOL:
                return step.eta
            raise RegularizedOptimumError(
                f"Newton stagnated with projected gradient {residual:.3g}"
            )
        eta = step.eta
    raise RegularizedOptimumError(
        f"no stationary point after {NEWTON_MAX_ITERS} Newton steps"
    )


# The maximizer has entries of order exp(-gap/λ), which iterates in η cannot
# resolve at small λ. For the σ-family and the conditional entropy the
# stationarity system r - λ∇φ(η) = A^T y is solved for the multipliers y and
# η is recovered through its policy.


def _solvable_in_log_coordinates(phi: Potential) -> bool:
    if isinstance(phi, SigmaPotential):
        return phi.sigma >= 1.0
    return isinstance(phi, ConditionalEntropyPotential)


def _soft_bellman_newton(m: Mdp, lam: float, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Newton's method on the soft Bellman equation y = λ log Σ_a exp(q_y / λ).

    Each step evaluates the current softmax policy exactly (soft policy
    iteration), so the iteration converges from any start.

    Returns:
        Tuple[np.ndarray, np.ndarray]: The logits q_y / λ of shape (S, A) and y
    """
    y = np.zeros(m.n_states)
    identity = np.eye(m.n_states)
    for k in range(NEWTON_MAX_ITERS):
        logits = (m.r + m.gamma * (m.alpha @ y)) / lam
        residual = y - lam * logsumexp(logits, axis=1)
        if not np.all(np.isfinite(residual)):
            raise RegularizedOptimumError("soft Bellman residual is not finite")
        if np.max(np.abs(residual)) <= tol * max(1.0, float(np.max(np.abs(y)))):
            logger.debug("Soft Bellman Newton converged", iterations=k, lam=lam)
            return logits, y
        pi = softmax_policy(SoftmaxParams(logits))
        try:
            y = y - np.linalg.solve(identity - m.gamma * state_kernel(m, pi), residual)
        except np.linalg.LinAlgError as e:
            raise RegularizedOptimumError(f"soft Bellman step failed: {e}") from e
    raise RegularizedOptimumError(
        f"soft Bellman equation unsolved after {NEWTON_MAX_ITERS} Newton steps"
    )


def _sigma_inverse_gradient(phi: SigmaPotential, z: np.ndarray) -> np.ndarray:
    # (∇φ_σ)^(-1), defined on z < 0 for σ > 1
    if phi.sigma == 1.0:
        return np.exp(z - 1.0)
    return np.power((1.0 - phi.sigma) * z, 1.0 / (1.0 - phi.sigma))


def _sigma_dual_newton(
    m: Mdp, phi: SigmaPotential, lam: float, tol: float, y0: np.ndarray
) -> np.ndarray:
    """
    Multipliers minimizing the dual λ φ*((r - A^T y) / λ) + ⟨b, y⟩.

    Damped Newton with Armijo backtracking. The dual gradient b - A η(y) is the
    constraint residual of η(y) = (∇φ)^(-1)((r - A^T y) / λ); iteration stops
    once its norm is below ``tol`` or below the rounding floor of z, which
    grows like ‖y‖/λ.
    """
    a = constraint_matrix(m)
    b = (1.0 - m.gamma) * m.mu
    eps = np.finfo(float).eps
    reward_scale = float(np.max(np.abs(m.r_flat)))

    def dual(y: np.ndarray) -> Optional[Tuple[np.ndarray, float]]:
        z = (m.r_flat - a.T @ y) / lam
        if phi.sigma > 1.0 and np.any(z >= 0.0):
            return None
        with np.errstate(over="ignore", invalid="ignore"):
            eta = _sigma_inverse_gradient(phi, z)
            value = lam * (float(z @ eta) - potential_value(phi, eta)) + float(b @ y)
        return (eta, value) if np.isfinite(value) else None

    y = y0
    state = dual(y)
    if state is None:
        raise RegularizedOptimumError("dual Newton start is outside the dual domain")
    for k in range(NEWTON_MAX_ITERS):
        eta, value = state
        residual = b - a @ eta
        floor = 8.0 * eps * (reward_scale + float(np.max(np.abs(y)))) / lam
        if np.linalg.norm(residual) <= max(tol, floor):
            logger.debug("Dual Newton converged", iterations=k, potential=phi.name, lam=lam)
            return y
        hessian = (a * np.power(eta, phi.sigma)) @ a.T / lam
        try:
            step = -linalg.cho_solve(linalg.cho_factor(hessian), residual)
        except (ValueError, linalg.LinAlgError) as e:
            raise RegularizedOptimumError(f"dual Hessian is singular: {e}") from e
        slope = float(residual @ step)
        slack = 100.0 * eps * (1.0 + abs(value))
        t = 1.0
        while True:
            trial = dual(y + t * step)
            if trial is not None and trial[1] <= value + ARMIJO * t * slope + slack:
                break
            t /= 2.0
            if t < MIN_LINE_STEP:
                raise RegularizedOptimumError(
                    f"dual line search failed with constraint residual "
                    f"{np.linalg.norm(residual):.3g}"
                )
        y = y + t * step
        state = trial
    raise RegularizedOptimumError(
        f"dual Newton unconverged after {NEWTON_MAX_ITERS} steps"
    )


def _log_coordinate_optimum(
    m: Mdp, phi: Potential, lam: float, tol: float
) -> StateActionFrequency:
    logits, y = _soft_bellman_newton(m, lam, tol)
    if isinstance(phi, ConditionalEntropyPotential):
        probs = softmax_policy(SoftmaxParams(logits)).probs
    else:
        # shifted so that (r - A^T y)/λ = log π - 1 < 0 at the start
        y = _sigma_dual_newton(m, phi, lam, tol, y + lam / (1.0 - m.gamma))
        z = ((m.r_flat - constraint_matrix(m).T @ y) / lam).reshape(m.shape)
        if phi.sigma == 1.0:
            probs = softmax_policy(SoftmaxParams(z)).probs
        else:
            eta = _sigma_inverse_gradient(phi, z)
            probs = eta / eta.sum(axis=1, keepdims=True)
    try:
        return state_action_frequency(m, Policy(probs))
    except NumericalError as e:
        raise RegularizedOptimumError(f"optimal policy has no frequency: {e}") from e


def newton_fixed_point(
    m: Mdp,
    phi: Potential,
    lam: float,
    eta0: Optional[np.ndarray] = None,
    tol: float = NEWTON_TOL,
) -> StateActionFrequency:
    """
    Maximizer of R_λ over the polytope, the fixed point of projected Newton.

    For σ >= 1 and the conditional entropy Newton's method runs on the
    multipliers of the stationarity system, which resolves entries far below
    machine epsilon; the result is exactly feasible, being the frequency of
    its policy. Other potentials iterate ``projected_newton_step`` from
    ``eta0`` (default: the uniform policy) and fall back to damped steps when
    the full-step iteration fails.

    Raises:
        DomainError: If λ <= 0
        RegularizedOptimumError: If no attempt reaches a stationary point
    """
    if lam <= 0.0:
        raise DomainError("regularization strength must be positive")
    if _solvable_in_log_coordinates(phi):
        return _log_coordinate_optimum(m, phi, lam, tol)

    start = (
        state_action_frequency(m, uniform_policy(m)).eta
        if eta0 is None
        else _vector(eta0)
    )
    retrying = Retrying(
        stop=stop_after_attempt(len(NEWTON_DAMPINGS)),
        retry=retry_if_exception_type(RegularizedOptimumError),
        before_sleep=lambda state: logger.warning(
            "Newton reference failed, retrying with damping",
            attempt=state.attempt_number,
            potential=phi.name,
            lam=lam,
        ),
        reraise=True,
    )
    for attempt in retrying:
        with attempt:
            damping = NEWTON_DAMPINGS[attempt.retry_state.attempt_number - 1]
            return _iterate_newton(m, start, phi, lam, damping, tol)
    raise RegularizedOptimumError("Newton reference did not run")  # pragma: no cover


# ---------------------------------------------------------------------------
# Regularized NPG as inexact Newton
# ---------------------------------------------------------------------------


def newton_step_size(lam: float) -> float:
    """Step size for which the Hessian NPG step matches the Newton step to first order."""
    return 1.0 / lam


def inexact_newton_deviation(
    m: Mdp,
    theta: SoftmaxParams,
    phi: Potential,
    lam: float,
    step_size: Optional[float] = None,
) -> Tuple[float, float]:
    """
    Compare one regularized Hessian NPG step with the exact Newton step.

    Returns:
        Tuple[float, float]: ‖Δη_NPG - Δη_Newton‖ and the norm of the projected
        gradient at η_θ
    """
    dt = newton_step_size(lam) if step_size is None else step_size
    terms = npg_terms(m, theta, HessianOf(phi), Objective(lam, phi))
    moved = SoftmaxParams(theta.theta + dt * terms.direction.reshape(m.shape))
    eta_next = state_action_frequency(m, softmax_policy(moved)).eta
    newton = _newton_direction(m, terms.eta, phi, lam)
    deviation = float(np.linalg.norm(eta_next - terms.eta - newton))
    return deviation, projected_gradient_norm(m, terms.eta, phi, lam)


def quadratic_tail(
    errors: Tuple[float, ...],
    target: float = QUADRATIC_TARGET,
    tail: int = QUADRATIC_TAIL,
    max_constant: float = QUADRATIC_MAX_CONSTANT,
) -> Tuple[bool, Optional[float]]:
    """
    Check e_{k+1} <= C e_k² on the last ``tail`` pairs before the target.

    Only pairs whose successor is still above ``target`` are measurable.

    Returns:
        Tuple[bool, Optional[float]]: The flag and the fitted constant C
    """
    pairs = [(a, b) for a, b in zip(errors, errors[1:]) if b > target and a > 0.0]
    if len(pairs) < tail:
        return False, None
    last = pairs[-tail:]
    constant = max(b / a**2 for a, b in last)
    decreasing = all(b < a for a, b in last)
    return decreasing and constant <= max_constant, constant


def regularized_npg_newton(
    m: Mdp,
    theta0: SoftmaxParams,
    phi: Potential,
    lam: float,
    max_iters: int = 50,
    step_size: Optional[float] = None,
    reference: Optional[np.ndarray] = None,
) -> NewtonReport:
    """
    Run the regularized Hessian NPG iteration and measure its convergence.

    θ_{k+1} = θ_k + Δt G_φ(θ_k)^+ ∇R_λ(θ_k) with the Newton step size, errors
    measured in η against the projected Newton fixed point.

    Args:
        m: The MDP
        theta0: Initial parameters
        phi: Regularizer, also defining the geometry
        lam: Regularization strength, λ > 0
        max_iters: Maximum number of NPG steps
        step_size: Overrides the Newton step size
        reference: Overrides the reference maximizer

    Returns:
        NewtonReport: Never raises for divergence; the report records it
    """
    dt = newton_step_size(lam) if step_size is None else step_size
    star = newton_fixed_point(m, phi, lam) if reference is None else None
    target = _vector(star if reference is None else reference)
    geo = HessianOf(phi)
    obj = Objective(lam, phi)

    theta = np.array(theta0.theta, dtype=np.float64)
    iterates: List[np.ndarray] = []
    errors: List[float] = []
    deviations: List[float] = []
    gradient_norms: List[float] = []
    rising = 0
    diverged = False

    for k in range(max_iters + 1):
        try:
            terms = npg_terms(m, SoftmaxParams(theta), geo, obj)
        except _FLOW_ERRORS as e:
            logger.warning("Regularized NPG left the domain", iteration=k, error=str(e))
            diverged = True
            break
        iterates.append(terms.eta)
        errors.append(float(np.linalg.norm(terms.eta - target)))
        if errors[-1] <= QUADRATIC_TARGET:
            break
        rising = rising + 1 if k > 0 and errors[-1] > errors[-2] else 0
        if rising >= DIVERGENCE_RUN or not np.isfinite(errors[-1]):
            diverged = True
            break
        if k == max_iters:
            break

        theta = theta + dt * terms.direction.reshape(m.shape)
        try:
            eta_next = state_action_frequency(m, softmax_policy(SoftmaxParams(theta))).eta
            newton = _newton_direction(m, terms.eta, phi, lam)
            deviations.append(float(np.linalg.norm(eta_next - terms.eta - newton)))
            gradient_norms.append(projected_gradient_norm(m, terms.eta, phi, lam))
        except _FLOW_ERRORS as e:
            logger.warning("Regularized NPG step failed", iteration=k, error=str(e))
            diverged = True
            break

    flag, constant = quadratic_tail(tuple(errors))
    flag = flag and not diverged
    logger.info(
        "Regularized NPG finished",
        potential=phi.name,
        lam=lam,
        iterations=len(errors) - 1,
        final_error=errors[-1] if errors else None,
        quadratic=flag,
    )
    return NewtonReport(
        iterates=tuple(iterates),
        errors=tuple(errors),
        quadratic_flag=flag,
        tail_constant=constant,
        diverged=diverged,
        deviations=tuple(deviations),
        gradient_norms=tuple(gradient_norms),
        step_size=dt,
    )
