"""
Independent ground truth for the optimization experiments.

The unregularized optimum is found by enumerating the vertices of the
state-action polytope, which are exactly the frequencies of deterministic
policies. Regularized optima come from projected Newton iteration.
"""

import itertools
from typing import Iterator, List, Tuple

import numpy as np

from npg_lab.dynamics import newton_fixed_point
from npg_lab.exceptions import DomainError, ScaleGuardError
from npg_lab.geometry import Potential, is_legendre, potential_value
from npg_lab.mdp_core import (
    Mdp,
    Policy,
    StateActionFrequency,
    deterministic_policy,
    state_action_frequency,
)
from npg_lab.oracle.interfaces import OracleResult
from npg_lab.utils.config import ENUMERATION_LIMIT, VALUE_TIE_TOL
from npg_lab.utils.logging import StructuredLogger

logger = StructuredLogger(__name__)


def deterministic_vertices(
    m: Mdp,
) -> Iterator[Tuple[Tuple[int, ...], Policy, StateActionFrequency]]:
    """
    Enumerate the deterministic policies of an MDP with their frequencies.

    Yields:
        (actions, policy, η) for each of the |A|^|S| action assignments

    Raises:
        ScaleGuardError: If |A|^|S| exceeds ``ENUMERATION_LIMIT``
    """
    count = m.n_actions**m.n_states
    if count > ENUMERATION_LIMIT:
        logger.error("Enumeration too large", policies=count, limit=ENUMERATION_LIMIT)
        raise ScaleGuardError(
            f"{count} deterministic policies exceed the limit of {ENUMERATION_LIMIT}"
        )
    for actions in itertools.product(range(m.n_actions), repeat=m.n_states):
        pi = deterministic_policy(m, actions)
        yield actions, pi, state_action_frequency(m, pi)


def enumerate_optimum(m: Mdp) -> OracleResult:
    """
    Solve the unregularized problem max ⟨r, η⟩ over the polytope exactly.

    Values within ``VALUE_TIE_TOL`` of the best are treated as ties.

    Raises:
        ScaleGuardError: If |A|^|S| exceeds ``ENUMERATION_LIMIT``
    """
    best = -np.inf
    leaders: List[Tuple[float, Tuple[int, ...], Policy, StateActionFrequency]] = []
    for actions, pi, eta in deterministic_vertices(m):
        value = float(m.r_flat @ eta.eta)
        if value > best + VALUE_TIE_TOL:
            best = value
            leaders = [entry for entry in leaders if entry[0] >= best - VALUE_TIE_TOL]
        if value >= best - VALUE_TIE_TOL:
            best = max(best, value)
            leaders.append((value, actions, pi, eta))

    leaders = [entry for entry in leaders if entry[0] >= best - VALUE_TIE_TOL]
    result = OracleResult(
        optimal_value=best,
        maximizers=tuple((pi, eta) for _, _, pi, eta in leaders),
        actions=tuple(actions for _, actions, _, _ in leaders),
        is_unique=len(leaders) == 1,
    )
    logger.info(
        "Enumerated optimum",
        optimal_value=best,
        maximizers=len(leaders),
        unique=result.is_unique,
    )
    return result


def regularized_optimum(
    m: Mdp, phi: Potential, lam: float
) -> Tuple[StateActionFrequency, float]:
    """
    Interior maximizer of R_λ(η) = ⟨r, η⟩ - λ φ(η) over the polytope.

    Computed by ``newton_fixed_point``, which runs Newton on the stationarity
    multipliers so that entries far below machine epsilon stay resolved.

    Args:
        m: The MDP
        phi: Legendre-type regularizer (σ >= 1 or conditional entropy)
        lam: Regularization strength, λ > 0

    Returns:
        Tuple[StateActionFrequency, float]: η*_λ and R_λ(η*_λ)

    Raises:
        DomainError: If λ <= 0 or φ is not of Legendre type
        RegularizedOptimumError: If Newton fails even with damping
    """
    if lam <= 0.0:
        raise DomainError("regularization strength must be positive")
    if not is_legendre(phi):
        raise DomainError(f"{phi.name} does not keep the maximizer in the interior")
    eta = newton_fixed_point(m, phi, lam)
    value = float(m.r_flat @ eta.eta) - lam * potential_value(phi, eta)
    logger.info("Regularized optimum", potential=phi.name, lam=lam, value=value)
    return eta, value
