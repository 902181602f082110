"""
Operations on finite MDPs.

Occupancy measures, their inverse (conditioning), Bellman quantities and the
linear description of the state-action polytope. All linear systems are small
and dense and are solved through an LU factorization.
"""

import json
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from npg_lab.exceptions import MdpValidationError, SingularSystemError, ZeroMarginalError
from npg_lab.mdp_core.interfaces import (
    BellmanData,
    Mdp,
    Policy,
    StateActionFrequency,
)
from npg_lab.utils.config import FEASIBILITY_TOL, STOCHASTIC_TOL
from npg_lab.utils.logging import StructuredLogger

logger = StructuredLogger(__name__)

BUILTIN_PREFIX = "builtin:"

EtaLike = Union[StateActionFrequency, np.ndarray, Sequence[float]]


def _eta_vector(eta: EtaLike) -> np.ndarray:
    if isinstance(eta, StateActionFrequency):
        return eta.eta
    return np.asarray(eta, dtype=np.float64).reshape(-1)


def validate_mdp(m: Mdp) -> None:
    """
    Check every MDP invariant.

    Args:
        m: The MDP to check

    Raises:
        MdpValidationError: Naming the first violated field and row
    """
    n_s, n_a = m.n_states, m.n_actions
    if n_s < 1 or n_a < 1:
        raise MdpValidationError("state and action counts must be positive", "n_states")
    if m.alpha.shape != (n_s, n_a, n_s):
        raise MdpValidationError(
            f"alpha has shape {m.alpha.shape}, expected {(n_s, n_a, n_s)}", "alpha"
        )
    if m.r.shape != (n_s, n_a):
        raise MdpValidationError(f"r has shape {m.r.shape}, expected {(n_s, n_a)}", "r")
    if m.mu.shape != (n_s,):
        raise MdpValidationError(f"mu has shape {m.mu.shape}, expected {(n_s,)}", "mu")
    if not np.all(np.isfinite(m.r)):
        raise MdpValidationError("reward is not finite", "r")
    if not 0.0 < m.gamma < 1.0:
        raise MdpValidationError(f"discount out of range: gamma={m.gamma}", "gamma")

    for s in range(n_s):
        for a in range(n_a):
            row = m.alpha[s, a]
            if np.any(row < 0.0) or not np.all(np.isfinite(row)):
                raise MdpValidationError("row has negative entries", "alpha", (s, a))
            if abs(row.sum() - 1.0) > STOCHASTIC_TOL:
                raise MdpValidationError(
                    f"row not stochastic (sums to {row.sum():.12g})", "alpha", (s, a)
                )

    if not np.all(np.isfinite(m.mu)):
        raise MdpValidationError("initial distribution is not finite", "mu")
    if np.any(m.mu < 0.0):
        raise MdpValidationError("initial distribution has negative entries", "mu")
    if abs(m.mu.sum() - 1.0) > STOCHASTIC_TOL:
        raise MdpValidationError(
            f"initial distribution not stochastic (sums to {m.mu.sum():.12g})", "mu"
        )


def validate_policy(m: Mdp, pi: Policy) -> None:
    """
    Check that a policy fits the MDP and is row-stochastic.

    Raises:
        MdpValidationError: On a shape mismatch or a non-stochastic row
    """
    if pi.probs.shape != m.shape:
        raise MdpValidationError(
            f"policy has shape {pi.probs.shape}, expected {m.shape}", "pi"
        )
    for s, row in enumerate(pi.probs):
        if np.any(row < 0.0) or abs(row.sum() - 1.0) > STOCHASTIC_TOL:
            raise MdpValidationError("policy row not stochastic", "pi", (s,))


def positivity_condition(m: Mdp) -> Optional[str]:
    """
    Report a sufficient condition for every state marginal to be positive.

    Returns:
        ``"mu_positive"`` if μ > 0, ``"alpha_positive"`` if α > 0 entrywise,
        otherwise ``None`` (marginals may still be positive for some policies).
    """
    if np.all(m.mu > 0.0):
        return "mu_positive"
    if np.all(m.alpha > 0.0) and m.gamma > 0.0:
        return "alpha_positive"
    return None


def uniform_policy(m: Mdp) -> Policy:
    return Policy(np.full(m.shape, 1.0 / m.n_actions))


def deterministic_policy(m: Mdp, actions: Sequence[int]) -> Policy:
    """Policy choosing ``actions[s]`` in state ``s`` with probability one."""
    probs = np.zeros(m.shape)
    probs[np.arange(m.n_states), np.asarray(actions, dtype=int)] = 1.0
    return Policy(probs)


def transition_kernels(m: Mdp, pi: Policy) -> Tuple[np.ndarray, np.ndarray]:
    """
    Markov kernels induced by a policy.

    Args:
        m: The MDP
        pi: The policy

    Returns:
        Tuple[np.ndarray, np.ndarray]: The state-action kernel of shape
        (SA, SA), P[(s,a),(s',a')] = α(s'|s,a) π(a'|s'), and the state kernel
        of shape (S, S), p[s,s'] = Σ_a π(a|s) α(s'|s,a)

    Raises:
        MdpValidationError: If the policy does not match the MDP dimensions
    """
    if pi.probs.shape != m.shape:
        raise MdpValidationError(
            f"policy has shape {pi.probs.shape}, expected {m.shape}", "pi"
        )
    big = np.einsum("ijk,kl->ijkl", m.alpha, pi.probs).reshape(m.n_pairs, m.n_pairs)
    return big, state_kernel(m, pi)


def state_kernel(m: Mdp, pi: Policy) -> np.ndarray:
    """State kernel p[s,s'] = Σ_a π(a|s) α(s'|s,a) without the state-action one."""
    return np.einsum("ij,ijk->ik", pi.probs, m.alpha)


def _solve(matrix: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    try:
        lu, piv = linalg.lu_factor(matrix, check_finite=True)
        solution = linalg.lu_solve((lu, piv), rhs)
    except (ValueError, linalg.LinAlgError) as e:
        logger.error("Linear solve failed", system=what, error=str(e))
        raise SingularSystemError(f"{what}: {e}") from e
    if not np.all(np.isfinite(solution)):
        logger.error("Linear solve produced non-finite values", system=what)
        raise SingularSystemError(f"{what}: singular system")
    return solution


def state_action_frequency(m: Mdp, pi: Policy) -> StateActionFrequency:
    """
    Discounted state-action frequency of a policy.

    η = (1 - γ)(I - γ P_π^T)^(-1) (μ∗π) with (μ∗π)(s, a) = μ(s) π(a|s). Since
    η(s, a) = ρ(s) π(a|s), the system is solved on states only,
    ρ = (1 - γ)(I - γ p_π^T)^(-1) μ, which keeps entries with tiny π(a|s)
    accurate to relative precision and exactly zero where π vanishes.

    Raises:
        SingularSystemError: If the resolvent cannot be formed
    """
    return StateActionFrequency(
        state_distribution(m, pi)[:, None] * pi.probs, m.n_states, m.n_actions
    )


def state_distribution(m: Mdp, pi: Policy) -> np.ndarray:
    """Discounted state marginal ρ^π = (1 - γ)(I - γ p_π^T)^(-1) μ."""
    if pi.probs.shape != m.shape:
        raise MdpValidationError(
            f"policy has shape {pi.probs.shape}, expected {m.shape}", "pi"
        )
    resolvent = np.eye(m.n_states) - m.gamma * state_kernel(m, pi).T
    rho = _solve(resolvent, (1.0 - m.gamma) * m.mu, "marginal")
    # rounding can leave -1e-17 on unreachable states
    return np.maximum(rho, 0.0)


def constraint_matrix(m: Mdp) -> np.ndarray:
    """
    Linear part of the polytope constraints.

    Returns:
        np.ndarray: Matrix of shape (S, SA) with entries
        δ(s, s') - γ α(s|s', a') in column (s', a')
    """
    aggregate = np.repeat(np.eye(m.n_states), m.n_actions, axis=1)
    return aggregate - m.gamma * m.alpha.reshape(m.n_pairs, m.n_states).T


def tangent_basis(m: Mdp) -> np.ndarray:
    """Orthonormal basis of the kernel of the constraint matrix, shape (SA, S(A-1))."""
    return linalg.null_space(constraint_matrix(m))


def polytope_residuals(m: Mdp, eta: EtaLike) -> np.ndarray:
    """
    Residuals ℓ_s(η) of the linear polytope constraints.

    ℓ_s(η) = Σ_a η(s,a) - γ Σ_{s',a'} η(s',a') α(s|s',a') - (1 - γ) μ(s)

    Returns:
        np.ndarray: One residual per state; all zero iff η lies in the affine
        hull of the state-action polytope
    """
    vector = _eta_vector(eta)
    return constraint_matrix(m) @ vector - (1.0 - m.gamma) * m.mu


def is_feasible(m: Mdp, eta: EtaLike, tol: float = FEASIBILITY_TOL) -> bool:
    vector = _eta_vector(eta)
    return bool(
        np.all(vector >= -tol)
        and abs(vector.sum() - 1.0) <= tol
        and np.max(np.abs(polytope_residuals(m, vector))) <= tol
    )


def state_marginal(m: Mdp, eta: EtaLike) -> np.ndarray:
    return _eta_vector(eta).reshape(m.shape).sum(axis=1)


def conditioning(m: Mdp, eta: EtaLike) -> Policy:
    """
    Recover the policy π(a|s) = η(s,a) / ρ(s) from a state-action frequency.

    Raises:
        ZeroMarginalError: If some state has zero marginal
    """
    matrix = _eta_vector(eta).reshape(m.shape)
    rho = matrix.sum(axis=1)
    empty = np.flatnonzero(rho <= 0.0)
    if empty.size:
        logger.warning("Conditioning on a zero state marginal", state=int(empty[0]))
        raise ZeroMarginalError(int(empty[0]))
    return Policy(matrix / rho[:, None])


def bellman_data(m: Mdp, pi: Policy) -> BellmanData:
    """
    Value functions and state marginal of a policy.

    Q solves (I - γ P_π) Q = r and V(s) = Σ_a π(a|s) Q(s, a).

    Raises:
        SingularSystemError: If the resolvent cannot be formed
    """
    big, _ = transition_kernels(m, pi)
    q = _solve(np.eye(m.n_pairs) - m.gamma * big, m.r_flat, "q-values").reshape(m.shape)
    v = np.sum(pi.probs * q, axis=1)
    rho = state_action_frequency(m, pi).rho
    return BellmanData(q=q, v=v, rho=rho)


def reward(m: Mdp, pi: Policy) -> float:
    """Normalized discounted reward R(π) = ⟨r, η^π⟩."""
    return float(m.r_flat @ state_action_frequency(m, pi).eta)


def mdp_from_dict(doc: Dict[str, Any]) -> Mdp:
    """
    Build and validate an MDP from its JSON document.

    Raises:
        MdpValidationError: On missing fields or violated invariants
    """
    try:
        m = Mdp(
            n_states=doc["n_states"],
            n_actions=doc["n_actions"],
            alpha=np.asarray(doc["alpha"], dtype=np.float64),
            r=np.asarray(doc["r"], dtype=np.float64),
            gamma=doc["gamma"],
            mu=np.asarray(doc["mu"], dtype=np.float64),
        )
    except KeyError as e:
        raise MdpValidationError("missing field", str(e.args[0])) from e
    validate_mdp(m)
    return m


def mdp_to_dict(m: Mdp) -> Dict[str, Any]:
    return {
        "n_states": m.n_states,
        "n_actions": m.n_actions,
        "alpha": m.alpha.tolist(),
        "r": m.r.tolist(),
        "gamma": m.gamma,
        "mu": m.mu.tolist(),
    }


def load_mdp(path: Union[str, Path]) -> Mdp:
    """
    Load an MDP from a JSON file.

    Args:
        path: File path, or ``"builtin:<name>"`` for a packaged MDP such as
            ``builtin:kakade_two_state``

    Raises:
        MdpValidationError: If the document is malformed
        OSError: If the file cannot be read
    """
    text_path = str(path)
    if text_path.startswith(BUILTIN_PREFIX):
        name = text_path[len(BUILTIN_PREFIX):]
        text = resources.files("npg_lab.data").joinpath(f"{name}.json").read_text()
    else:
        text = Path(text_path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise MdpValidationError(f"invalid JSON: {e}", "document") from e
    m = mdp_from_dict(doc)
    logger.debug("Loaded MDP", path=text_path, n_states=m.n_states, n_actions=m.n_actions)
    return m
