"""
Convex potentials, Bregman divergences and Hessian metrics.

The Hessian of a potential defines a Riemannian metric on the interior of the
state-action polytope; the projected Riemannian gradient in this module is the
right-hand side of the corresponding gradient flow.
"""

from typing import Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.special import xlogy

from npg_lab.exceptions import DomainError, SingularSystemError
from npg_lab.geometry.interfaces import (
    BregmanValue,
    ConditionalEntropyPotential,
    CustomPotential,
    Potential,
    SigmaPotential,
)
from npg_lab.mdp_core import Mdp, StateActionFrequency, tangent_basis
from npg_lab.utils.config import FD_STEP
from npg_lab.utils.logging import StructuredLogger

logger = StructuredLogger(__name__)


def parse_potential(text: str, shape: Optional[Tuple[int, int]] = None) -> Potential:
    """
    Parse a potential name as used in configs and on the command line.

    Args:
        text: ``"sigma:<float>"`` or ``"conditional_entropy"``
        shape: (n_states, n_actions), required for the conditional entropy

    Raises:
        DomainError: If the name is not recognised
    """
    key = text.strip().lower()
    if key.startswith("sigma:"):
        try:
            return SigmaPotential(float(key.split(":", 1)[1]))
        except ValueError as e:
            raise DomainError(f"invalid sigma in potential {text!r}") from e
    if key in ("conditional_entropy", "conditional-entropy"):
        if shape is None:
            raise DomainError("conditional_entropy needs the MDP dimensions")
        return ConditionalEntropyPotential(*shape)
    raise DomainError(f"unknown potential {text!r}")


def is_legendre(phi: Potential) -> bool:
    """Whether the potential's gradient blows up at the boundary (σ >= 1, conditional entropy)."""
    if isinstance(phi, SigmaPotential):
        return phi.sigma >= 1.0
    return isinstance(phi, ConditionalEntropyPotential)


def _vector(x) -> np.ndarray:
    if isinstance(x, StateActionFrequency):
        return x.eta
    return np.asarray(x, dtype=np.float64).reshape(-1)


def _allows_negative(sigma: float) -> bool:
    # x^(2-σ) is real on all of R only for integer exponents
    return sigma <= 0.0 and float(2.0 - sigma).is_integer()


def _check_domain(phi: Potential, x: np.ndarray, differentiate: bool) -> None:
    if isinstance(phi, CustomPotential):
        return
    if isinstance(phi, SigmaPotential) and _allows_negative(phi.sigma):
        return
    strict = differentiate and not (
        isinstance(phi, SigmaPotential) and phi.sigma <= 0.0
    )
    bad = np.flatnonzero(x <= 0.0) if strict else np.flatnonzero(x < 0.0)
    if bad.size:
        raise DomainError(
            f"{phi.name} requires {'positive' if strict else 'nonnegative'} "
            f"entries; x[{bad[0]}] = {x[bad[0]]:.3g}"
        )


def _rho(phi: ConditionalEntropyPotential, x: np.ndarray) -> np.ndarray:
    return x.reshape(phi.n_states, phi.n_actions).sum(axis=1)


def potential_value(phi: Potential, x) -> float:
    """
    Evaluate a potential.

    Zero entries are accepted and follow 0 log 0 = 0; potentials that blow
    up at the boundary (σ >= 2) return +inf there.

    Raises:
        DomainError: On entries outside the domain of φ
    """
    x = _vector(x)
    if isinstance(phi, CustomPotential):
        return float(phi.value(x))
    _check_domain(phi, x, differentiate=False)
    if isinstance(phi, ConditionalEntropyPotential):
        rho = _rho(phi, x)
        return float(np.sum(xlogy(x, x)) - np.sum(xlogy(rho, rho)))

    sigma = phi.sigma
    if sigma == 1.0:
        return float(np.sum(xlogy(x, x)))
    if sigma == 2.0:
        if np.any(x == 0.0):
            return float("inf")
        return float(-np.sum(np.log(x)))
    with np.errstate(divide="ignore"):
        total = np.sum(np.power(x, 2.0 - sigma))
    return float(total / ((2.0 - sigma) * (1.0 - sigma)))


def potential_gradient(phi: Potential, x) -> np.ndarray:
    """
    Analytic gradient of a potential.

    Raises:
        DomainError: On entries outside the open domain of φ
    """
    x = _vector(x)
    if isinstance(phi, CustomPotential):
        return np.asarray(phi.gradient(x), dtype=np.float64)
    _check_domain(phi, x, differentiate=True)
    if isinstance(phi, ConditionalEntropyPotential):
        rho = np.repeat(_rho(phi, x), phi.n_actions)
        return np.log(x / rho)

    sigma = phi.sigma
    if sigma == 1.0:
        return np.log(x) + 1.0
    if sigma == 2.0:
        return -1.0 / x
    return np.power(x, 1.0 - sigma) / (1.0 - sigma)


def potential_hessian(phi: Potential, x) -> np.ndarray:
    """
    Analytic Hessian of a potential.

    Returns:
        np.ndarray: diag(x^(-σ)) for the σ-family; for the conditional entropy
        a block diagonal with blocks diag(1/η_s) - 1/ρ(s) per state

    Raises:
        DomainError: On entries outside the open domain of φ
    """
    x = _vector(x)
    if isinstance(phi, CustomPotential):
        return np.asarray(phi.hessian(x), dtype=np.float64)
    _check_domain(phi, x, differentiate=True)
    if isinstance(phi, ConditionalEntropyPotential):
        blocks = x.reshape(phi.n_states, phi.n_actions)
        rho = blocks.sum(axis=1)
        return linalg.block_diag(
            *(np.diag(1.0 / row) - 1.0 / total for row, total in zip(blocks, rho))
        )
    if phi.sigma == 0.0:
        return np.eye(x.size)
    return np.diag(np.power(x, -phi.sigma))


def _bregman_raw(phi: Potential, x: np.ndarray, y: np.ndarray) -> float:
    fx = potential_value(phi, x)
    if np.isinf(fx):
        return float("inf")
    return fx - potential_value(phi, y) - float(potential_gradient(phi, y) @ (x - y))


def bregman_divergence(phi: Potential, x, y) -> BregmanValue:
    """
    Bregman divergence D_φ(x, y) = φ(x) - φ(y) - ⟨∇φ(y), x - y⟩.

    Args:
        phi: The potential
        x: Point in the closure of the domain (zeros allowed)
        y: Point in the open domain

    Returns:
        BregmanValue: Nonnegative value, +inf if φ(x) is infinite
    """
    value = _bregman_raw(phi, _vector(x), _vector(y))
    return BregmanValue(max(value, 0.0))


def metric_inner(phi: Potential, x, v, w) -> float:
    """Hessian inner product g_x(v, w) = v^T ∇²φ(x) w."""
    return float(_vector(v) @ potential_hessian(phi, x) @ _vector(w))


def _fd_hessian(f, y: np.ndarray) -> np.ndarray:
    n = y.size
    h = FD_STEP * np.maximum(1.0, np.abs(y))
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h[i]
            ej[j] = h[j]
            value = (
                f(y + ei + ej) - f(y + ei - ej) - f(y - ei + ej) + f(y - ei - ej)
            ) / (4.0 * h[i] * h[j])
            out[i, j] = out[j, i] = value
    return out


def hessian_of_bregman_check(phi: Potential, x) -> Tuple[np.ndarray, np.ndarray]:
    """
    Finite-difference Hessians of y -> D_φ(x, y) and y -> D_φ(y, x) at y = x.

    Both should agree with ``potential_hessian(phi, x)``; used by the test
    suite to check the Bregman-Hessian identity.
    """
    x = _vector(x)
    first = _fd_hessian(lambda y: _bregman_raw(phi, x, y), x)
    second = _fd_hessian(lambda y: _bregman_raw(phi, y, x), x)
    return first, second


def projected_riemannian_gradient(
    m: Mdp, eta, phi: Potential, grad: np.ndarray, basis: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Project the Riemannian gradient ∇²φ(η)^(-1) grad g-orthogonally onto the tangent space.

    With B an orthonormal basis of the tangent space this is
    B (B^T H B)^(-1) B^T grad, which stays well defined when H is only
    positive definite on the tangent space (conditional entropy).

    Raises:
        SingularSystemError: If the reduced metric is not positive definite
    """
    b = tangent_basis(m) if basis is None else basis
    if b.shape[1] == 0:
        return np.zeros(m.n_pairs)
    reduced = b.T @ potential_hessian(phi, eta) @ b
    try:
        factor = linalg.cho_factor(0.5 * (reduced + reduced.T))
    except linalg.LinAlgError as e:
        logger.error("Reduced metric not positive definite", potential=phi.name)
        raise SingularSystemError("reduced metric is not positive definite") from e
    return b @ linalg.cho_solve(factor, b.T @ np.asarray(grad, dtype=np.float64))
