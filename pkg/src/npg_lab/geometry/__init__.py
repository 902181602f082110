from .interfaces import (
    BregmanValue,
    ConditionalEntropyPotential,
    CustomPotential,
    Potential,
    SigmaPotential,
)
from .services import (
    bregman_divergence,
    hessian_of_bregman_check,
    is_legendre,
    metric_inner,
    parse_potential,
    potential_gradient,
    potential_hessian,
    potential_value,
    projected_riemannian_gradient,
)

__all__ = [
    "BregmanValue",
    "ConditionalEntropyPotential",
    "CustomPotential",
    "Potential",
    "SigmaPotential",
    "bregman_divergence",
    "hessian_of_bregman_check",
    "is_legendre",
    "metric_inner",
    "parse_potential",
    "potential_gradient",
    "potential_hessian",
    "potential_value",
    "projected_riemannian_gradient",
]
