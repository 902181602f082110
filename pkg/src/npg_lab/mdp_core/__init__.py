from .interfaces import BellmanData, Mdp, Policy, StateActionFrequency
from .services import (
    bellman_data,
    conditioning,
    constraint_matrix,
    deterministic_policy,
    is_feasible,
    load_mdp,
    mdp_from_dict,
    mdp_to_dict,
    polytope_residuals,
    positivity_condition,
    reward,
    state_action_frequency,
    state_distribution,
    state_kernel,
    state_marginal,
    tangent_basis,
    transition_kernels,
    uniform_policy,
    validate_mdp,
    validate_policy,
)

__all__ = [
    "BellmanData",
    "Mdp",
    "Policy",
    "StateActionFrequency",
    "bellman_data",
    "conditioning",
    "constraint_matrix",
    "deterministic_policy",
    "is_feasible",
    "load_mdp",
    "mdp_from_dict",
    "mdp_to_dict",
    "polytope_residuals",
    "positivity_condition",
    "reward",
    "state_action_frequency",
    "state_distribution",
    "state_kernel",
    "state_marginal",
    "tangent_basis",
    "transition_kernels",
    "uniform_policy",
    "validate_mdp",
    "validate_policy",
]
