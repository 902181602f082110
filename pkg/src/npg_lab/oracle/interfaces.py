"""
Type definitions for the optimality oracle.
"""

from dataclasses import dataclass
from typing import Tuple

from npg_lab.mdp_core import Policy, StateActionFrequency


@dataclass(frozen=True)
class OracleResult:
    """
    Exact unregularized optimum of an MDP.

    Attributes:
        optimal_value: R* = max over deterministic policies of ⟨r, η⟩
        maximizers: Every (deterministic policy, vertex η) attaining R* up to ties
        actions: The action choice of each maximizer, one tuple per maximizer
        is_unique: False when two or more deterministic policies tie
    """

    optimal_value: float
    maximizers: Tuple[Tuple[Policy, StateActionFrequency], ...]
    actions: Tuple[Tuple[int, ...], ...]
    is_unique: bool

    @property
    def eta_star(self) -> StateActionFrequency:
        return self.maximizers[0][1]

    @property
    def policy_star(self) -> Policy:
        return self.maximizers[0][0]
