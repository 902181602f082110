"""
Tabular softmax policy gradients and natural policy gradients.

Every Gram matrix is a pullback of a metric on state-action frequencies
through the Jacobian D_θ η, except the vanilla one (identity) and the direct
policy-space assemblies kept for cross-validation.
"""

from typing import Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from npg_lab.exceptions import DomainError
from npg_lab.geometry import (
    ConditionalEntropyPotential,
    CustomPotential,
    Potential,
    SigmaPotential,
    is_legendre,
    parse_potential,
    potential_gradient,
    potential_hessian,
    potential_value,
)
from npg_lab.mdp_core import (
    Mdp,
    Policy,
    bellman_data,
    state_action_frequency,
    state_kernel,
)
from npg_lab.npg.interfaces import (
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
from npg_lab.utils.config import PINV_RTOL


def parse_geometry(text: str, shape: Optional[Tuple[int, int]] = None) -> GeometrySpec:
    """
    Parse a geometry name.

    Args:
        text: ``vanilla``, ``kakade``, ``morimura``, ``sigma:<float>`` or
            ``hessian:<potential>``
        shape: (n_states, n_actions), needed for ``hessian:conditional_entropy``

    Raises:
        DomainError: If the name is not recognised
    """
    key = text.strip().lower()
    if key == "vanilla":
        return Vanilla()
    if key == "kakade":
        return Kakade()
    if key == "morimura":
        return Morimura()
    if key.startswith("sigma:"):
        try:
            return Sigma(float(key.split(":", 1)[1]))
        except ValueError as e:
            raise DomainError(f"invalid sigma in geometry {text!r}") from e
    if key.startswith("hessian:"):
        return HessianOf(parse_potential(key.split(":", 1)[1], shape))
    raise DomainError(f"unknown geometry {text!r}")


def potential_of(geo: GeometrySpec, shape: Tuple[int, int]) -> Optional[Potential]:
    """The potential whose Hessian metric the geometry pulls back, if any."""
    if isinstance(geo, Kakade):
        return ConditionalEntropyPotential(*shape)
    if isinstance(geo, Morimura):
        return SigmaPotential(1.0)
    if isinstance(geo, Sigma):
        return SigmaPotential(geo.sigma)
    if isinstance(geo, HessianOf):
        return geo.phi
    return None


def may_hit_boundary(geo: GeometrySpec) -> bool:
    """Whether flows of this geometry can reach the boundary of the polytope in finite time."""
    if isinstance(geo, Sigma):
        return geo.sigma < 1.0
    if isinstance(geo, HessianOf):
        return not is_legendre(geo.phi)
    return False


def softmax_policy(theta: SoftmaxParams) -> Policy:
    """Row-wise softmax π(a|s) = exp θ(s,a) / Σ_a' exp θ(s,a')."""
    t = theta.theta
    return Policy(np.exp(t - logsumexp(t, axis=1, keepdims=True)))


def _softmax_jacobian(pi: np.ndarray) -> np.ndarray:
    # ∂π(a|s)/∂θ(s,a') = π(a|s)(δ_aa' - π(a'|s)), zero across states
    n_states, n_actions = pi.shape
    blocks = pi[:, :, None] * np.eye(n_actions) - pi[:, :, None] * pi[:, None, :]
    jac = np.zeros((n_states, n_actions, n_states, n_actions))
    jac[np.arange(n_states), :, np.arange(n_states), :] = blocks
    return jac.reshape(n_states * n_actions, n_states * n_actions)


def _regularized_eta_gradient(m: Mdp, eta: np.ndarray, obj: Objective) -> np.ndarray:
    if not obj.is_regularized:
        return m.r_flat.copy()
    return m.r_flat - obj.lam * potential_gradient(obj.regularizer, eta)


def objective_value(m: Mdp, theta: SoftmaxParams, obj: Objective) -> float:
    """R_λ(θ) = ⟨r, η_θ⟩ - λ φ(η_θ)."""
    eta = state_action_frequency(m, softmax_policy(theta)).eta
    return eta_objective(m, eta, obj)


def eta_objective(m: Mdp, eta: np.ndarray, obj: Objective) -> float:
    value = float(m.r_flat @ eta)
    if obj.is_regularized:
        value -= obj.lam * potential_value(obj.regularizer, eta)
    return value


def _jacobian_at(m: Mdp, pi: Policy, eta: np.ndarray) -> np.ndarray:
    # η = ρ ⊙ π, so D η = π ⊙ D ρ + ρ ⊙ D π with
    # D ρ = γ (I - γ p^T)^(-1) α^T diag(ρ) D π
    small = state_kernel(m, pi)
    rho = np.repeat(eta.reshape(m.shape).sum(axis=1), m.n_actions)
    weighted = rho[:, None] * _softmax_jacobian(pi.probs)
    transport = m.gamma * m.alpha.reshape(m.n_pairs, m.n_states).T @ weighted
    d_rho = linalg.solve(np.eye(m.n_states) - m.gamma * small.T, transport)
    return pi.flat[:, None] * np.repeat(d_rho, m.n_actions, axis=0) + weighted


def jacobian_eta(m: Mdp, theta: SoftmaxParams) -> np.ndarray:
    """
    Exact Jacobian D_θ η of the state-action frequency.

    Equal to (I - γ P_π^T)^(-1) diag(ρ) D_θ π with ρ repeated over actions;
    assembled through η = ρ ⊙ π so that rows of rarely taken actions keep
    relative precision.

    Returns:
        np.ndarray: Matrix of shape (SA, SA); rows index η, columns index θ
    """
    pi = softmax_policy(theta)
    eta = state_action_frequency(m, pi).eta
    return _jacobian_at(m, pi, eta)


def policy_gradient(m: Mdp, theta: SoftmaxParams, obj: Objective) -> np.ndarray:
    """
    Exact gradient of R_λ(θ) with respect to θ, flattened.

    Uses the chain rule through η: ∇_θ R_λ = (D_θ η)^T (r - λ ∇φ(η_θ)).
    """
    pi = softmax_policy(theta)
    eta = state_action_frequency(m, pi).eta
    jac = _jacobian_at(m, pi, eta)
    return jac.T @ _regularized_eta_gradient(m, eta, obj)


def advantage(m: Mdp, pi: Policy) -> np.ndarray:
    """Advantage function A(s,a) = Q(s,a) - V(s)."""
    data = bellman_data(m, pi)
    return data.q - data.v[:, None]


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def _kakade_gram_at(pi: Policy, eta: np.ndarray) -> np.ndarray:
    rho = eta.reshape(pi.probs.shape).sum(axis=1)
    weights = np.repeat(rho, pi.probs.shape[1])
    return _symmetrize(weights[:, None] * _softmax_jacobian(pi.probs))


def kakade_gram_policy_space(m: Mdp, theta: SoftmaxParams) -> np.ndarray:
    """Kakade's Gram matrix Σ_s ρ(s) F_s(θ) with F_s the Fisher matrix of π(·|s)."""
    pi = softmax_policy(theta)
    return _kakade_gram_at(pi, state_action_frequency(m, pi).eta)


def state_fisher_matrix(m: Mdp, theta: SoftmaxParams) -> np.ndarray:
    """Fisher information F_ρ of the state marginal ρ_θ."""
    jac = jacobian_eta(m, theta)
    rho = state_action_frequency(m, softmax_policy(theta)).rho
    jac_rho = jac.reshape(m.n_states, m.n_actions, -1).sum(axis=1)
    return _symmetrize(jac_rho.T @ (jac_rho / rho[:, None]))


def morimura_gram_score_form(m: Mdp, theta: SoftmaxParams) -> np.ndarray:
    """Morimura's Gram matrix Σ η ∇log η ∇log η^T from the score functions."""
    jac = jacobian_eta(m, theta)
    eta = state_action_frequency(m, softmax_policy(theta)).eta
    score = jac / eta[:, None]
    return _symmetrize(score.T @ (eta[:, None] * score))


def kakade_gram_state_action(m: Mdp, theta: SoftmaxParams) -> np.ndarray:
    """Kakade's Gram matrix written as G_M - F_ρ."""
    return _symmetrize(morimura_gram_score_form(m, theta) - state_fisher_matrix(m, theta))


def _pullback(jac: np.ndarray, eta: np.ndarray, phi: Potential) -> np.ndarray:
    if isinstance(phi, SigmaPotential):
        # diagonal metric: rows of vanishing η carry no motion and are dropped
        keep = eta > 0.0 if phi.sigma > 0.0 else np.ones(eta.size, dtype=bool)
        weights = np.power(eta[keep], -phi.sigma)
        rows = jac[keep]
        return _symmetrize(rows.T @ (weights[:, None] * rows))
    if isinstance(phi, (ConditionalEntropyPotential, CustomPotential)):
        return _symmetrize(jac.T @ potential_hessian(phi, eta) @ jac)
    raise DomainError(f"unsupported potential {phi!r}")


def _gram_at(
    m: Mdp, pi: Policy, geo: GeometrySpec, eta: np.ndarray, jac: np.ndarray
) -> np.ndarray:
    if isinstance(geo, Vanilla):
        return np.eye(m.n_pairs)
    if isinstance(geo, Kakade):
        return _kakade_gram_at(pi, eta)
    if isinstance(geo, Morimura):
        # a vanishing η(s,a) leaves a non-finite score and the caller reports it
        with np.errstate(divide="ignore", invalid="ignore"):
            score = jac / eta[:, None]
        return _symmetrize(score.T @ (eta[:, None] * score))
    return _pullback(jac, eta, potential_of(geo, m.shape))


def gram_matrix(m: Mdp, theta: SoftmaxParams, geo: GeometrySpec) -> np.ndarray:
    """
    Gram matrix G(θ) of a natural policy gradient method.

    Returns:
        np.ndarray: Symmetric positive semidefinite matrix of shape (SA, SA)
    """
    pi = softmax_policy(theta)
    eta = state_action_frequency(m, pi).eta
    return _gram_at(m, pi, geo, eta, _jacobian_at(m, pi, eta))


def natural_direction(gram: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    """
    Moore-Penrose solve G^+ ∇ with a relative singular-value cutoff.

    A non-finite Gram matrix or gradient gives a NaN direction instead of an
    exception, so that flows can report the step as diverged.
    """
    if not (np.all(np.isfinite(gram)) and np.all(np.isfinite(gradient))):
        return np.full(gradient.shape, np.nan)
    return linalg.pinv(gram, atol=0.0, rtol=PINV_RTOL) @ gradient


def npg_terms(
    m: Mdp, theta: SoftmaxParams, geo: GeometrySpec, obj: Objective
) -> NpgTerms:
    """Evaluate η, D_θ η, ∇R_λ, G and the natural direction at θ in one pass."""
    pi = softmax_policy(theta)
    eta = state_action_frequency(m, pi).eta
    jac = _jacobian_at(m, pi, eta)
    gradient = jac.T @ _regularized_eta_gradient(m, eta, obj)
    gram = _gram_at(m, pi, geo, eta, jac)
    direction = gradient if isinstance(geo, Vanilla) else natural_direction(gram, gradient)
    return NpgTerms(
        eta=eta,
        jacobian=jac,
        gradient=gradient,
        gram=gram,
        direction=direction,
        policy=pi.probs,
    )


def npg_direction(
    m: Mdp, theta: SoftmaxParams, geo: GeometrySpec, obj: Objective
) -> np.ndarray:
    """
    Natural policy gradient G(θ)^+ ∇R_λ(θ), flattened.

    The pseudoinverse is computed by SVD with relative cutoff ``PINV_RTOL``.
    """
    return npg_terms(m, theta, geo, obj).direction
