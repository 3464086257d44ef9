"""
Exact, vectorized enumeration of histories.

A layer at depth k holds every surviving history tau_k = (o_1, a_1, ..., o_k, a_k) as rows:

- alpha[i, s]   = P_M(tau_k, s_{k+1} = s), the environment part (no action probabilities)
- action_prob[i] = pi(tau_k), the product of the policy's action probabilities

Branches with zero probability are pruned, so the cost follows the support of the
process rather than the full (O * A)^k grid. The full grid size is still checked
against the enumeration cap before anything is allocated.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
import psutil

from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy
from src.utils.errors import CapacityError, ParameterError
from src.utils.settings_manager import resolve_enumeration_cap

BYTES_PER_ENTRY = 8


def check_capacity(required: int, cap: Optional[int] = None, what: str = "enumeration", width: int = 1) -> int:
    """
    Refuse an exact computation whose size exceeds the cap or the available memory.

    :param required: Number of enumerated items
    :param width: Floats stored per item, used for the memory estimate
    :return: The resolved cap
    """
    cap = resolve_enumeration_cap(cap)
    if required > cap:
        raise CapacityError(required, cap, what=what)
    needed = required * max(width, 1) * BYTES_PER_ENTRY
    available = psutil.virtual_memory().available
    if needed > available:
        logging.warning(f"{what} needs ~{needed / 2**20:.0f} MiB, only {available / 2**20:.0f} MiB available")
        raise CapacityError(required, cap, what=f"{what} (memory)")
    logging.debug(f"{what}: {required} items within cap {cap}")
    return cap


@dataclass(frozen=True)
class HistoryLayer:
    depth: int
    observations: np.ndarray  # (N, depth)
    actions: np.ndarray  # (N, depth)
    alpha: np.ndarray  # (N, |S_{depth+1}|)
    action_prob: np.ndarray  # (N,)

    @property
    def size(self) -> int:
        return self.alpha.shape[0]

    @property
    def environment_prob(self) -> np.ndarray:
        """P_M(tau_k) per row."""
        return self.alpha.sum(axis=1)

    @property
    def joint_prob(self) -> np.ndarray:
        """P^pi_M(tau_k) per row."""
        return self.environment_prob * self.action_prob

    @property
    def beliefs(self) -> np.ndarray:
        """b_S(tau_k) per row; rows are pruned to positive probability."""
        return self.alpha / self.environment_prob[:, None]


@dataclass(frozen=True)
class TrajectoryTable:
    """Every full trajectory with positive probability (or every one, when not pruned)."""

    observations: np.ndarray  # (N, H)
    actions: np.ndarray  # (N, H)
    environment_prob: np.ndarray  # (N,)
    action_prob: np.ndarray  # (N,)

    @property
    def joint_prob(self) -> np.ndarray:
        return self.environment_prob * self.action_prob

    def returns(self, model: TabularPomdp) -> np.ndarray:
        total = np.zeros(self.observations.shape[0])
        for k in range(model.horizon):
            total += model.rewards[k][self.observations[:, k]]
        return total


def initial_layer(model: TabularPomdp) -> HistoryLayer:
    return HistoryLayer(
        depth=0,
        observations=np.zeros((1, 0), dtype=np.int64),
        actions=np.zeros((1, 0), dtype=np.int64),
        alpha=np.array(model.initial_dist, dtype=np.float64)[None, :],
        action_prob=np.ones(1),
    )


def _observe(model: TabularPomdp, layer: HistoryLayer, policy: Optional[Policy]):
    """Branch every row on o_{k+1}; returns (observations, action history, beta, probs) in (row, o) order."""
    k = layer.depth
    emission = model.emissions[k]
    n, n_obs, A = layer.size, emission.shape[0], model.action_count
    beta = (layer.alpha[:, None, :] * emission[None, :, :]).reshape(n * n_obs, -1)
    observations = np.concatenate(
        [np.repeat(layer.observations, n_obs, axis=0), np.tile(np.arange(n_obs), n)[:, None]], axis=1
    )
    action_history = np.repeat(layer.actions, n_obs, axis=0)
    if policy is None:
        probs = np.ones((n * n_obs, A))
    else:
        probs = policy.batch_probs(k + 1, observations, action_history)
    return observations, action_history, beta, probs


def _branch_actions(layer: HistoryLayer, observations, action_history, probs):
    n_rows, A = probs.shape
    new_observations = np.repeat(observations, A, axis=0)
    new_actions = np.concatenate(
        [np.repeat(action_history, A, axis=0), np.tile(np.arange(A), n_rows)[:, None]], axis=1
    )
    parent_weight = np.repeat(layer.action_prob, n_rows // max(layer.size, 1))
    action_prob = (parent_weight[:, None] * probs).reshape(-1)
    return new_observations, new_actions, action_prob


def expand_layer(model: TabularPomdp, layer: HistoryLayer, policy: Optional[Policy], prune: bool = True) -> HistoryLayer:
    """Extend every history by one (o, a) step and push the latent vector through T_{k+1, a}."""
    k = layer.depth
    if k >= model.horizon - 1:
        raise ParameterError(f"cannot expand past depth {model.horizon - 1}")
    observations, action_history, beta, probs = _observe(model, layer, policy)
    # (rows, A, S') in (row, a) order
    alpha = np.einsum("ats,ns->nat", model.transitions[k], beta).reshape(-1, model.state_counts[k + 1])
    new_observations, new_actions, action_prob = _branch_actions(layer, observations, action_history, probs)
    if prune:
        keep = (alpha.sum(axis=1) > 0) & (action_prob > 0)
        new_observations, new_actions = new_observations[keep], new_actions[keep]
        alpha, action_prob = alpha[keep], action_prob[keep]
    return HistoryLayer(k + 1, new_observations, new_actions, alpha, action_prob)


def history_layers(
    model: TabularPomdp,
    policy: Optional[Policy],
    depth: int,
    cap: Optional[int] = None,
    prune: bool = True,
) -> Iterator[HistoryLayer]:
    """
    Yield the layers tau_0, tau_1, ..., tau_depth (depth <= H - 1).

    :param policy: Weights histories by pi(tau); None enumerates every action sequence with weight 1
    """
    if not 0 <= depth <= model.horizon - 1:
        raise ParameterError(f"history depth must lie in [0, {model.horizon - 1}], got {depth}")
    if policy is not None:
        policy.check_compatible(model)
    check_capacity(model.enumeration_size(depth), cap, what=f"history enumeration to depth {depth}",
                   width=max(model.state_counts) + 2 * depth)
    layer = initial_layer(model)
    yield layer
    for _ in range(depth):
        layer = expand_layer(model, layer, policy, prune=prune)
        logging.debug(f"history layer {layer.depth}: {layer.size} rows")
        yield layer


def enumerate_trajectories(
    model: TabularPomdp,
    policy: Optional[Policy],
    cap: Optional[int] = None,
    prune: bool = True,
) -> TrajectoryTable:
    """Every full trajectory tau_H with its environment and action probabilities."""
    check_capacity(model.enumeration_size(), cap, what="trajectory enumeration",
                   width=2 * model.horizon + 2)
    for layer in history_layers(model, policy, model.horizon - 1, cap=cap, prune=prune):
        pass
    observations, action_history, beta, probs = _observe(model, layer, policy)
    environment = np.repeat(beta.sum(axis=1), model.action_count)
    new_observations, new_actions, action_prob = _branch_actions(layer, observations, action_history, probs)
    if prune:
        keep = (environment > 0) & (action_prob > 0)
        new_observations, new_actions = new_observations[keep], new_actions[keep]
        environment, action_prob = environment[keep], action_prob[keep]
    return TrajectoryTable(new_observations, new_actions, environment, action_prob)
