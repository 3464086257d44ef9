import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy
from src.pomdp_core.trajectory import Dataset, Trajectory
from src.utils.errors import ParameterError, UnsupportedPolicyError
from src.utils.rng import categorical, make_rng


@dataclass(frozen=True)
class ValueEstimate:
    value: float
    standard_error: float
    samples: int


def sample_trajectories(
    model: TabularPomdp,
    policy: Policy,
    n: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Run n independent episodes side by side.

    :return: observations (n, H), actions (n, H), rewards (n, H)
    """
    if n < 0:
        raise ParameterError(f"sample count must be non-negative, got {n}")
    policy.check_compatible(model)
    H = model.horizon
    observations = np.zeros((n, H), dtype=np.int64)
    actions = np.zeros((n, H), dtype=np.int64)
    rewards = np.zeros((n, H))
    if n == 0:
        return observations, actions, rewards
    states = categorical(rng, np.broadcast_to(model.initial_dist, (n, model.state_counts[0])))
    for k in range(H):
        observations[:, k] = categorical(rng, model.emissions[k][:, states].T)
        rewards[:, k] = model.rewards[k][observations[:, k]]
        actions[:, k] = categorical(rng, policy.batch_probs(k + 1, observations, actions))
        if k < H - 1:
            states = categorical(rng, model.transitions[k][actions[:, k], :, states])
    return observations, actions, rewards


def sample_trajectory(model: TabularPomdp, policy: Policy, rng: np.random.Generator) -> Trajectory:
    observations, actions, rewards = sample_trajectories(model, policy, 1, rng)
    return Trajectory(tuple(observations[0]), tuple(actions[0]), tuple(rewards[0]))


def sample_dataset(
    model: TabularPomdp,
    policy: Policy,
    n: int,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> Dataset:
    """Draw n trajectories; without an explicit generator the dataset is keyed by `seed`."""
    rng = make_rng(seed) if rng is None else rng
    observations, actions, rewards = sample_trajectories(model, policy, n, rng)
    logging.debug(f"Sampled {n} trajectories from {model.name or '<unnamed>'} under {policy.policy_id}")
    return Dataset(observations, actions, rewards, behavior_policy_id=policy.policy_id, seed=seed)


def sample_from_state(
    model: TabularPomdp,
    policy: Policy,
    h: int,
    state: int,
    n: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Roll out n futures (o_h, a_h, ..., o_H, a_H) from a forced latent state s_h.

    Only memoryless policies have a well-defined conditional law here.
    """
    if not policy.is_memoryless:
        raise UnsupportedPolicyError("conditional rollouts need a memoryless policy")
    if not 1 <= h <= model.horizon:
        raise ParameterError(f"step must lie in [1, {model.horizon}], got {h}")
    length = model.horizon - h + 1
    observations = np.zeros((n, length), dtype=np.int64)
    actions = np.zeros((n, length), dtype=np.int64)
    rewards = np.zeros((n, length))
    states = np.full(n, state, dtype=np.int64)
    for j, k in enumerate(range(h - 1, model.horizon)):
        observations[:, j] = categorical(rng, model.emissions[k][:, states].T)
        rewards[:, j] = model.rewards[k][observations[:, j]]
        table = policy.memoryless_table(k + 1, model.obs_counts[k])
        actions[:, j] = categorical(rng, table[observations[:, j]])
        if k < model.horizon - 1:
            states = categorical(rng, model.transitions[k][actions[:, j], :, states])
    return observations, actions, rewards


def estimate_policy_value(model: TabularPomdp, policy: Policy, samples: int, rng: np.random.Generator) -> ValueEstimate:
    """Monte Carlo J(pi) with its standard error."""
    if samples < 1:
        raise ParameterError(f"Monte Carlo mode needs at least one sample, got {samples}")
    _, _, rewards = sample_trajectories(model, policy, samples, rng)
    returns = rewards.sum(axis=1)
    error = float(returns.std(ddof=1) / np.sqrt(samples)) if samples > 1 else float("inf")
    return ValueEstimate(value=float(returns.mean()), standard_error=error, samples=samples)
