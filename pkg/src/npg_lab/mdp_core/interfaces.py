"""
Type definitions for finite MDPs, policies and state-action frequencies.

State-action pairs are flattened as ``s * n_actions + a`` everywhere in the
package. Arrays held by these types are copied on construction and marked
read-only, so instances can be shared freely between workers.
"""

from dataclasses import dataclass

import numpy as np


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Mdp:
    """
    A finite discounted Markov decision process.

    Attributes:
        n_states: Number of states
        n_actions: Number of actions
        alpha: Transition tensor of shape (S, A, S), alpha[s, a, s'] = α(s'|s, a)
        r: Reward matrix of shape (S, A)
        gamma: Discount factor in (0, 1)
        mu: Initial state distribution of shape (S,)

    Construction only coerces shapes; use ``validate_mdp`` to check the
    probabilistic invariants.
    """

    n_states: int
    n_actions: int
    alpha: np.ndarray
    r: np.ndarray
    gamma: float
    mu: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_states", int(self.n_states))
        object.__setattr__(self, "n_actions", int(self.n_actions))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "alpha", _frozen(self.alpha))
        object.__setattr__(self, "r", _frozen(self.r))
        object.__setattr__(self, "mu", _frozen(self.mu))

    @property
    def n_pairs(self) -> int:
        return self.n_states * self.n_actions

    @property
    def r_flat(self) -> np.ndarray:
        return self.r.reshape(self.n_pairs)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_states, self.n_actions


@dataclass(frozen=True)
class Policy:
    """A stationary stochastic policy, probs[s, a] = π(a|s)."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "probs", _frozen(self.probs))

    @property
    def flat(self) -> np.ndarray:
        return self.probs.reshape(-1)


@dataclass(frozen=True)
class StateActionFrequency:
    """
    Discounted state-action frequency η, stored as a flat vector.

    Attributes:
        eta: Vector of length S * A
        n_states: Number of states
        n_actions: Number of actions
    """

    eta: np.ndarray
    n_states: int
    n_actions: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "eta", _frozen(np.ravel(self.eta)))
        if self.eta.size != self.n_states * self.n_actions:
            raise ValueError(
                f"eta has {self.eta.size} entries, expected "
                f"{self.n_states * self.n_actions}"
            )

    @property
    def matrix(self) -> np.ndarray:
        return self.eta.reshape(self.n_states, self.n_actions)

    @property
    def rho(self) -> np.ndarray:
        """State marginal ρ(s) = Σ_a η(s, a)."""
        return self.matrix.sum(axis=1)


@dataclass(frozen=True)
class BellmanData:
    """
    Value functions of a policy together with its state marginal.

    Attributes:
        q: State-action values Q^π, shape (S, A)
        v: State values V^π, shape (S,)
        rho: Discounted state marginal ρ^π, shape (S,)
    """

    q: np.ndarray
    v: np.ndarray
    rho: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", _frozen(self.q))
        object.__setattr__(self, "v", _frozen(self.v))
        object.__setattr__(self, "rho", _frozen(self.rho))
