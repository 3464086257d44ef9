import numpy as np
import pytest

from src.constructions.mdp import mdp_embed
from src.constructions.random_models import perturb_model
from src.coverage.coefficients import compute_c_a, history_sigmas, occupancy_ratio_bound
from src.coverage.matrices import outcome_matrix
from src.estimators.effective_coverage import c_eff_multi, c_eff_single, error_operators
from src.estimators.fdvf import fdvf_construct
from src.estimators.likelihood import (
    class_log_likelihoods,
    eps_approx,
    log_likelihood,
    mle_select,
    trajectory_log_likelihoods,
)
from src.estimators.model_class import ModelClass
from src.estimators.ope import (
    importance_sampling_ope,
    log_likelihood_table,
    model_based_ope,
    restricted_policy_oracle,
    true_value_result,
)
from src.pomdp_core.inference import latent_value, trajectory_prob
from src.pomdp_core.policy import Policy
from src.pomdp_core.simulate import sample_dataset
from src.pomdp_core.trajectory import Dataset, Trajectory
from src.utils.errors import (
    DegenerateWeightError,
    EmptyModelClassError,
    ParameterError,
    StructuralError,
    UnsupportedPolicyError,
    ZeroBehaviorProbabilityError,
    ZeroLikelihoodError,
)
from src.utils.rng import make_rng
from src.utils.types import OpeMethod, RevealingMode
from tests.strategies import random_memoryless


def _all_right_dataset(bundle):
    """One trajectory of M* that plays R at every step."""
    H = bundle.true_model.horizon
    trajectory = Trajectory.from_history(bundle.true_model, [(0, 1)] * (H - 1) + [(1, 1)])
    return Dataset.from_trajectories([trajectory], H, behavior_policy_id="pi_b")


def _random_mdp(rng, horizon=3, states=3, actions=2):
    transitions = [rng.dirichlet(np.ones(states), size=(actions, states)).transpose(0, 2, 1) for _ in range(horizon - 1)]
    rewards = [rng.uniform(0.1, 1.0, size=states) for _ in range(horizon)]
    initial = rng.dirichlet(np.ones(states))
    return mdp_embed(transitions, rewards, initial)


def test_log_likelihoods_match_trajectory_probabilities(revealing_model, uniform):
    data = sample_dataset(revealing_model, uniform, 30, seed=3)
    scores = trajectory_log_likelihoods(revealing_model, uniform, data)
    expected = [np.log(trajectory_prob(revealing_model, uniform, t).joint) for t in data.trajectories]
    assert scores == pytest.approx(expected)
    assert log_likelihood(revealing_model, uniform, data) == pytest.approx(sum(expected))


def test_horizon_mismatch_is_structural(revealing_model, uniform, chain4):
    data = sample_dataset(chain4.true_model, chain4.behavior_policy, 5, seed=0)
    with pytest.raises(StructuralError):
        trajectory_log_likelihoods(revealing_model, uniform, data)


def test_ties_go_to_the_lowest_index(revealing_model, uniform):
    data = sample_dataset(revealing_model, uniform, 20, seed=1)
    models = ModelClass((revealing_model.renamed("first"), revealing_model.renamed("second")))
    assert mle_select(models, uniform, data) == 0


def test_empty_class_is_refused(revealing_model, uniform):
    data = sample_dataset(revealing_model, uniform, 5, seed=1)
    with pytest.raises(EmptyModelClassError):
        mle_select(ModelClass(()), uniform, data)
    with pytest.raises(EmptyModelClassError):
        eps_approx((), revealing_model, uniform, data)


def test_zero_likelihood_member_loses(knife_edge6):
    data = _all_right_dataset(knife_edge6)
    behavior = knife_edge6.behavior_policy
    knife_edge = knife_edge6.model("M2")
    with pytest.raises(ZeroLikelihoodError) as raised:
        trajectory_log_likelihoods(knife_edge, behavior, data)
    assert raised.value.trajectory_index == 0
    floored = trajectory_log_likelihoods(knife_edge, behavior, data, floor=1e-300)
    assert floored[0] == pytest.approx(np.log(1e-300))
    scores = class_log_likelihoods(knife_edge6.model_class, behavior, data)
    assert np.isfinite(scores[0]) and scores[1] == -np.inf
    assert mle_select(knife_edge6.model_class, behavior, data) == 0
    assert log_likelihood_table(knife_edge6.model_class, behavior, data)[1] == "-inf"
    with pytest.raises(ZeroLikelihoodError):
        mle_select(ModelClass((knife_edge,)), behavior, data)


def test_eps_approx(revealing_model, uniform, knife_edge6):
    data = sample_dataset(revealing_model, uniform, 40, seed=2)
    perturbed = perturb_model(revealing_model, make_rng(0), 0.2)
    assert eps_approx([revealing_model], revealing_model, uniform, data) == 0.0
    assert eps_approx([perturbed, revealing_model], revealing_model, uniform, data) <= 0.0
    assert eps_approx([perturbed], revealing_model, uniform, data) != 0.0
    assert eps_approx([perturbed], revealing_model, uniform, Dataset(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 3)))) == 0.0
    chain_data = sample_dataset(knife_edge6.true_model, knife_edge6.behavior_policy, 40, seed=2)
    recording = knife_edge6.model("M1")
    assert eps_approx([recording], knife_edge6.true_model, knife_edge6.behavior_policy, chain_data) == pytest.approx(0.0, abs=1e-12)


def test_importance_sampling_on_policy_is_the_sample_mean(revealing_model, uniform):
    data = sample_dataset(revealing_model, uniform, 50, seed=4)
    result = importance_sampling_ope(data, uniform, uniform)
    assert result.method == OpeMethod.IMPORTANCE_SAMPLING
    assert result.estimate == pytest.approx(data.returns.mean())
    assert result.diagnostics["effectiveSampleSize"] == pytest.approx(50)
    assert result.diagnostics["maxWeight"] == pytest.approx(1.0)
    assert result.selected_model_index is None


def test_importance_sampling_weights(chain4):
    data = sample_dataset(chain4.true_model, chain4.behavior_policy, 200, seed=8)
    result = importance_sampling_ope(data, chain4.target("pi_1"), chain4.behavior_policy)
    all_left = np.all(data.actions == 0, axis=1)
    weights = np.where(all_left, 2.0**4, 0.0)
    assert result.diagnostics["unclippedEstimate"] == pytest.approx(np.mean(weights * data.returns))
    assert result.estimate == pytest.approx(min(np.mean(weights * data.returns), 4.0))
    assert result.diagnostics["maxWeight"] == (16.0 if all_left.any() else 0.0)


def test_importance_sampling_estimate_stays_within_the_horizon(chain4):
    lucky = Trajectory.from_history(chain4.true_model, [(0, 0)] * 4)
    data = Dataset.from_trajectories([lucky], 4, behavior_policy_id="pi_b")
    result = importance_sampling_ope(data, chain4.target("pi_1"), chain4.behavior_policy)
    assert result.diagnostics["unclippedEstimate"] == pytest.approx(16.0)
    assert result.estimate == 4.0
    assert result.diagnostics["clipped"] is True


def test_importance_sampling_refusals(revealing_model, uniform):
    data = sample_dataset(revealing_model, uniform, 50, seed=4)
    always_left = Policy.open_loop([0, 0, 0], 2)
    with pytest.raises(ZeroBehaviorProbabilityError):
        importance_sampling_ope(data, uniform, always_left)
    empty = Dataset(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 3)))
    with pytest.raises(ParameterError):
        importance_sampling_ope(empty, uniform, uniform)


def test_transcripts_agree_unless_the_all_left_history_appears(chain4):
    for seed in range(10):
        data = sample_dataset(chain4.true_model, chain4.behavior_policy, 4, seed=seed)
        first = restricted_policy_oracle(chain4.target("pi_1"), data)
        second = restricted_policy_oracle(chain4.target("pi_2"), data)
        all_left_prefix = np.all(data.actions[:, :2] == 0, axis=1)
        assert (first == second) == (not all_left_prefix.any())
        assert first.differing_trajectories(second).tolist() == np.flatnonzero(all_left_prefix).tolist()
        assert len(first) == 4 * 4
        assert first.distributions.shape == (4, 4, 2)


def test_model_based_estimate_on_the_chain(chain4):
    data = sample_dataset(chain4.true_model, chain4.behavior_policy, 25, seed=6)
    for policy_id, value in (("pi_1", 1.0), ("pi_2", 0.0)):
        result = model_based_ope(chain4.model_class, chain4.behavior_policy, chain4.target(policy_id), data)
        assert result.method == OpeMethod.MODEL_BASED_MLE
        assert result.estimate == pytest.approx(value)
        assert result.selected_model_index == 0
        report = result.diagnostics
        assert report["n"] == 25
        assert report["prefilterKept"] == [0]
        assert report["selectedModelName"] == "Mstar"
        assert report["absError"] == pytest.approx(0.0)
        assert report["tvDistance"] == pytest.approx(0.0)
        assert report["epsApprox"] == 0.0
        assert report["cEff"]["value"] == 1.0
    assert true_value_result(chain4.model_class, chain4.target("pi_1")).estimate == pytest.approx(1.0)


def test_knife_edge_class(knife_edge6):
    data = sample_dataset(knife_edge6.true_model, knife_edge6.behavior_policy, 30, seed=0)
    target = knife_edge6.target("always_R")
    with pytest.raises(EmptyModelClassError):
        model_based_ope(knife_edge6.model_class, knife_edge6.behavior_policy, target, data, threshold=100.0)
    result = model_based_ope(knife_edge6.model_class, knife_edge6.behavior_policy, target, data)
    assert result.selected_model_index == 0
    assert result.estimate == pytest.approx(0.0)
    assert "absError" not in result.diagnostics
    with pytest.raises(ParameterError):
        true_value_result(knife_edge6.model_class, target)


def test_future_dependent_value_function_recovers_latent_values(revealing_model, uniform, rng):
    target = random_memoryless(revealing_model, rng)
    for h in (1, 2, 3):
        value = fdvf_construct(revealing_model, uniform, target, h)
        outcome = outcome_matrix(revealing_model, uniform, h).matrix
        assert outcome.T @ value == pytest.approx(latent_value(revealing_model, target, h))


def test_on_policy_value_function_is_the_future_return(revealing_model, uniform):
    for h in (1, 2):
        outcome = outcome_matrix(revealing_model, uniform, h)
        value = fdvf_construct(revealing_model, uniform, uniform, h)
        reachable = outcome.matrix.sum(axis=1) > 0
        assert value[reachable] == pytest.approx(outcome.index.future_returns(revealing_model)[reachable])


def test_value_function_refusals(chain4, revealing_model, uniform):
    with pytest.raises(DegenerateWeightError):
        fdvf_construct(chain4.true_model, chain4.behavior_policy, chain4.behavior_policy, 3)
    with pytest.raises(UnsupportedPolicyError):
        fdvf_construct(chain4.true_model, chain4.behavior_policy, chain4.target("pi_1"), 1)
    with pytest.raises(ParameterError):
        fdvf_construct(revealing_model, uniform, uniform, 4)


def test_exact_estimate_has_unit_effective_coverage(revealing_model, uniform, rng):
    target = random_memoryless(revealing_model, rng)
    for coverage in (c_eff_single, c_eff_multi):
        result = coverage(revealing_model, revealing_model, target, uniform, tighter=True)
        assert result.value == 1.0
        assert result.tighter == 1.0
        assert result.per_step == {1: 1.0, 2: 1.0}


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_effective_coverage_is_bounded_by_action_and_history_coverage(revealing_model, uniform, seed):
    rng = make_rng(seed)
    estimate = perturb_model(revealing_model, rng, 0.15)
    target = random_memoryless(revealing_model, rng)
    c_a = compute_c_a(revealing_model, uniform)
    c_h = max(r.coefficient for r in history_sigmas(revealing_model, uniform))
    for coverage in (c_eff_single, c_eff_multi):
        result = coverage(revealing_model, estimate, target, uniform, tighter=True)
        assert 0.0 <= result.value <= c_a * c_h + 1e-6
        assert result.tighter <= result.value + 1e-8
        assert set(result.tighter_per_step) == set(result.per_step)


@pytest.mark.parametrize("seed", [3, 4, 5])
def test_mdp_effective_coverage_is_bounded_by_occupancy_ratios(seed):
    rng = make_rng(seed)
    mdp = _random_mdp(rng)
    estimate = perturb_model(mdp, rng, 0.1)
    behavior = random_memoryless(mdp, rng, policy_id="behavior")
    target = random_memoryless(mdp, rng, policy_id="target")
    result = c_eff_single(mdp, estimate, target, behavior)
    assert result.value <= occupancy_ratio_bound(mdp, target, behavior) + 1e-8


def test_error_operators_vanish_only_for_matching_models(revealing_model, uniform):
    same = error_operators(revealing_model, revealing_model, RevealingMode.SINGLE, uniform)
    assert all(np.abs(d).max() <= 1e-10 for d in same)
    moved = error_operators(revealing_model, perturb_model(revealing_model, make_rng(1), 0.2, step=1), RevealingMode.SINGLE, uniform)
    assert np.abs(moved[0]).max() > 1e-6
    assert moved[0].shape == (3, 2, 3, 2)


def test_tighter_coefficient_needs_a_memoryless_target(chain4):
    with pytest.raises(UnsupportedPolicyError):
        c_eff_single(chain4.true_model, chain4.true_model, chain4.target("pi_1"), chain4.behavior_policy, tighter=True)
