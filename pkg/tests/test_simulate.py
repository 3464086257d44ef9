import numpy as np
import pytest
from scipy import stats

from src.constructions.random_models import mle_rate_model
from src.pomdp_core.enumeration import enumerate_trajectories
from src.pomdp_core.inference import latent_value, policy_value
from src.pomdp_core.policy import Policy
from src.pomdp_core.simulate import (
    estimate_policy_value,
    sample_dataset,
    sample_from_state,
    sample_trajectories,
    sample_trajectory,
)
from src.pomdp_core.trajectory import Dataset
from src.utils.errors import ParameterError, UnsupportedPolicyError
from src.utils.rng import make_rng


def test_datasets_are_keyed_by_seed(revealing_model, uniform):
    first = sample_dataset(revealing_model, uniform, 50, seed=11)
    second = sample_dataset(revealing_model, uniform, 50, seed=11)
    third = sample_dataset(revealing_model, uniform, 50, seed=12)
    assert np.array_equal(first.observations, second.observations)
    assert np.array_equal(first.actions, second.actions)
    assert not np.array_equal(first.actions, third.actions)
    assert first.behavior_policy_id == "uniform"
    first.validate(revealing_model)


def test_sampled_rewards_follow_the_observations(revealing_model, uniform, rng):
    observations, _, rewards = sample_trajectories(revealing_model, uniform, 100, rng)
    for k in range(revealing_model.horizon):
        assert np.array_equal(rewards[:, k], revealing_model.rewards[k][observations[:, k]])


def test_empty_sample(revealing_model, uniform, rng):
    observations, actions, rewards = sample_trajectories(revealing_model, uniform, 0, rng)
    assert observations.shape == (0, revealing_model.horizon)
    with pytest.raises(ParameterError):
        sample_trajectories(revealing_model, uniform, -1, rng)


def test_open_loop_actions_are_followed(revealing_model, rng):
    policy = Policy.open_loop([1, 0, 1], 2)
    trajectory = sample_trajectory(revealing_model, policy, rng)
    assert trajectory.actions == (1, 0, 1)
    assert trajectory.total_return == pytest.approx(sum(trajectory.rewards))


def test_trajectory_frequencies_match_enumeration(revealing_model, uniform):
    n = 20_000
    observations, actions, _ = sample_trajectories(revealing_model, uniform, n, make_rng(5))
    table = enumerate_trajectories(revealing_model, uniform, prune=False)
    index = {
        (tuple(o), tuple(a)): i for i, (o, a) in enumerate(zip(table.observations.tolist(), table.actions.tolist()))
    }
    counts = np.zeros(len(index))
    for o, a in zip(observations.tolist(), actions.tolist()):
        counts[index[(tuple(o), tuple(a))]] += 1
    expected = n * table.joint_prob
    sparse = expected < 5
    if sparse.any():
        counts = np.append(counts[~sparse], counts[sparse].sum())
        expected = np.append(expected[~sparse], expected[sparse].sum())
    _, p_value = stats.chisquare(counts, expected)
    assert p_value > 1e-4


def test_monte_carlo_value_is_within_five_standard_errors():
    model = mle_rate_model()
    policy = Policy.uniform(model)
    estimate = estimate_policy_value(model, policy, 20_000, make_rng(2))
    assert estimate.samples == 20_000
    assert abs(estimate.value - policy_value(model, policy)) <= 5 * estimate.standard_error


def test_single_sample_has_infinite_standard_error(revealing_model, uniform, rng):
    assert estimate_policy_value(revealing_model, uniform, 1, rng).standard_error == float("inf")


def test_rollouts_from_a_state_estimate_the_latent_value():
    model = mle_rate_model()
    policy = Policy.uniform(model)
    _, _, rewards = sample_from_state(model, policy, 3, 1, 20_000, make_rng(9))
    returns = rewards.sum(axis=1)
    error = returns.std(ddof=1) / np.sqrt(returns.size)
    assert abs(returns.mean() - latent_value(model, policy, 3)[1]) <= 5 * error


def test_rollouts_need_a_memoryless_policy(chain4, rng):
    with pytest.raises(UnsupportedPolicyError):
        sample_from_state(chain4.true_model, chain4.target("pi_1"), 1, 0, 5, rng)


def test_dataset_from_trajectories(revealing_model, uniform, rng):
    trajectories = [sample_trajectory(revealing_model, uniform, rng) for _ in range(4)]
    dataset = Dataset.from_trajectories(trajectories, revealing_model.horizon, behavior_policy_id="uniform")
    assert dataset.n == len(dataset) == 4
    assert dataset.trajectories == trajectories
    assert np.allclose(dataset.returns, [t.total_return for t in trajectories])
