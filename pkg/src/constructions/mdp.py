from typing import Sequence

import numpy as np

from src.pomdp_core.model import TabularPomdp
from src.utils.errors import StructuralError


def mdp_embed(
    transitions: Sequence[np.ndarray],
    state_rewards: Sequence[np.ndarray],
    initial_dist: np.ndarray,
    name: str = "mdp",
) -> TabularPomdp:
    """
    A tabular MDP as a POMDP with identity emissions: o_h = s_h and O_h = |S_h|.

    :param transitions: transitions[k] has shape (A, |S_{k+2}|, |S_{k+1}|)
    :param state_rewards: state_rewards[k][s] is the reward of state s at step k + 1
    """
    state_rewards = [np.asarray(r, dtype=np.float64) for r in state_rewards]
    if not transitions:
        state_counts = [len(state_rewards[0])] if state_rewards else []
        action_count = 1
    else:
        shapes = [np.shape(t) for t in transitions]
        if any(len(shape) != 3 for shape in shapes):
            raise StructuralError(f"MDP transitions must be (A, S', S) tensors, got shapes {shapes}")
        state_counts = [shapes[0][2]] + [shape[1] for shape in shapes]
        action_count = shapes[0][0]
    return TabularPomdp(
        horizon=len(state_rewards),
        state_counts=state_counts,
        action_count=action_count,
        obs_counts=state_counts,
        initial_dist=initial_dist,
        transitions=transitions,
        emissions=[np.eye(count) for count in state_counts],
        rewards=state_rewards,
        name=name,
    )


def mdp_value_iteration(
    transitions: Sequence[np.ndarray],
    state_rewards: Sequence[np.ndarray],
    initial_dist: np.ndarray,
    policy_tables: Sequence[np.ndarray],
) -> float:
    """J(pi) of a state-feedback policy by backward dynamic programming; policy_tables[k][s, a]."""
    value = np.asarray(state_rewards[-1], dtype=np.float64)
    for k in range(len(state_rewards) - 2, -1, -1):
        continuation = np.einsum("ats,t->as", np.asarray(transitions[k]), value)
        value = np.asarray(state_rewards[k]) + np.einsum("sa,as->s", np.asarray(policy_tables[k]), continuation)
    return float(np.asarray(initial_dist) @ value)
