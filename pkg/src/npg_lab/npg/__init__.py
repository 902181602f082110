from .interfaces import (
    GeometrySpec,
    HessianOf,
    Kakade,
    Morimura,
    NpgTerms,
    Objective,
    Sigma,
    SoftmaxParams,
    Vanilla,
)
from .services import (
    advantage,
    eta_objective,
    gram_matrix,
    jacobian_eta,
    kakade_gram_policy_space,
    kakade_gram_state_action,
    may_hit_boundary,
    morimura_gram_score_form,
    natural_direction,
    npg_direction,
    npg_terms,
    objective_value,
    parse_geometry,
    policy_gradient,
    potential_of,
    softmax_policy,
    state_fisher_matrix,
)

__all__ = [
    "GeometrySpec",
    "HessianOf",
    "Kakade",
    "Morimura",
    "NpgTerms",
    "Objective",
    "Sigma",
    "SoftmaxParams",
    "Vanilla",
    "advantage",
    "eta_objective",
    "gram_matrix",
    "jacobian_eta",
    "kakade_gram_policy_space",
    "kakade_gram_state_action",
    "may_hit_boundary",
    "morimura_gram_score_form",
    "natural_direction",
    "npg_direction",
    "npg_terms",
    "objective_value",
    "parse_geometry",
    "policy_gradient",
    "potential_of",
    "softmax_policy",
    "state_fisher_matrix",
]
