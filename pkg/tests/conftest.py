"""Shared fixtures: the two-state example MDP, random MDPs and a one-state MDP."""

import numpy as np
import pytest

from npg_lab.mdp_core import Mdp, load_mdp


@pytest.fixture
def two_state() -> Mdp:
    """Two states, two actions, gamma = 0.9, mu = (0.2, 0.8); optimum 1.84."""
    return load_mdp("builtin:kakade_two_state")


@pytest.fixture
def random_mdp():
    """Factory for seeded MDPs with full-support kernels and initial distribution."""

    def make(n_states: int = 3, n_actions: int = 2, gamma: float = 0.8, seed: int = 0) -> Mdp:
        rng = np.random.default_rng(seed)
        alpha = rng.uniform(0.1, 1.0, size=(n_states, n_actions, n_states))
        alpha /= alpha.sum(axis=2, keepdims=True)
        mu = rng.uniform(0.1, 1.0, size=n_states)
        return Mdp(
            n_states=n_states,
            n_actions=n_actions,
            alpha=alpha,
            r=rng.uniform(0.0, 1.0, size=(n_states, n_actions)),
            gamma=gamma,
            mu=mu / mu.sum(),
        )

    return make


@pytest.fixture
def single_state() -> Mdp:
    """One state with two self-loop actions paying 2 and 1."""
    return Mdp(
        n_states=1,
        n_actions=2,
        alpha=np.ones((1, 2, 1)),
        r=np.array([[2.0, 1.0]]),
        gamma=0.5,
        mu=np.array([1.0]),
    )


@pytest.fixture
def with_reward():
    """Copy of an MDP with its reward replaced."""

    def swap(m: Mdp, r) -> Mdp:
        return Mdp(m.n_states, m.n_actions, m.alpha, np.asarray(r, dtype=float), m.gamma, m.mu)

    return swap
