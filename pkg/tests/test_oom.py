import numpy as np
import pytest
from hypothesis import given

from src.oom import build_oom, oom_check, oom_trajectory_prob, operator_contraction_check
from src.oom.checks import belief_relation_residual, belief_residuals, oom_layers, oom_vector, reconstruction_residual
from src.pomdp_core.inference import trajectory_prob
from src.pomdp_core.policy import Policy
from src.utils.errors import ParameterError, RevealingViolationError, StructuralError, UnsupportedPolicyError
from src.utils.rng import make_rng
from src.utils.types import GenerationRevealing, PseudoInverseWeighting, RevealingMode
from tests.strategies import pomdps, random_memoryless

BUILDS = [
    (RevealingMode.SINGLE, PseudoInverseWeighting.UNIFORM),
    (RevealingMode.MULTI, PseudoInverseWeighting.UNIFORM),
    (RevealingMode.SINGLE, PseudoInverseWeighting.OCCUPANCY),
    (RevealingMode.MULTI, PseudoInverseWeighting.OCCUPANCY),
]


@pytest.mark.parametrize("mode,weighting", BUILDS)
def test_operators_reproduce_the_model(revealing_model, uniform, mode, weighting):
    oom = build_oom(revealing_model, mode, uniform, weighting)
    reconstruction, trajectories = reconstruction_residual(revealing_model, oom)
    belief, histories = belief_residuals(revealing_model, oom)
    assert trajectories == (3 * 2) ** 3
    assert histories == 1 + 6 + 36
    assert reconstruction <= 1e-8
    assert belief <= 1e-8


def test_single_step_dimensions(revealing_model):
    oom = build_oom(revealing_model)
    assert [oom.dimension(h) for h in (1, 2, 3)] == [3, 3, 3]
    assert oom.operator(1, 0, 1).shape == (3, 3)
    assert oom.b0 == pytest.approx(revealing_model.emissions[0] @ revealing_model.initial_dist)
    with pytest.raises(ParameterError):
        oom.operator(3, 0, 0)


def test_multi_step_dimensions_are_future_counts(revealing_model, uniform):
    oom = build_oom(revealing_model, RevealingMode.MULTI, uniform)
    assert [oom.dimension(h) for h in (1, 2, 3)] == [108, 18, 3]
    assert oom.behavior_policy_id == "uniform"
    assert oom.b0.sum() == pytest.approx(1.0)


def test_trajectory_probability_matches_latent_recursion(revealing_model, uniform, rng):
    policy = random_memoryless(revealing_model, rng)
    for mode in RevealingMode:
        oom = build_oom(revealing_model, mode, uniform)
        for tau in ([(0, 1)], [(2, 0), (1, 1)], [(1, 1), (0, 0), (2, 1)]):
            assert oom_trajectory_prob(oom, policy, tau) == pytest.approx(trajectory_prob(revealing_model, policy, tau).joint)


def test_trajectory_probability_rejects_bad_histories(revealing_model, uniform):
    oom = build_oom(revealing_model)
    with pytest.raises(StructuralError):
        oom_trajectory_prob(oom, uniform, [])
    with pytest.raises(StructuralError):
        oom_trajectory_prob(oom, uniform, [(3, 0)])


def test_belief_relation_on_single_histories(revealing_model, uniform):
    oom = build_oom(revealing_model, RevealingMode.MULTI, uniform)
    for history in ([], [(0, 0)], [(2, 1), (1, 0)]):
        assert belief_relation_residual(revealing_model, oom, history) <= 1e-8
    with pytest.raises(StructuralError):
        belief_relation_residual(revealing_model, oom, [(0, 0)] * 3)


def test_layers_follow_the_branching_order(revealing_model):
    oom = build_oom(revealing_model)
    layers = list(oom_layers(oom))
    assert [layer.shape[0] for layer in layers] == [1, 6, 36]
    assert layers[2][1 * 6 + 4] == pytest.approx(oom_vector(oom, [(0, 1), (2, 0)]))


def test_multi_step_operators_need_a_memoryless_behavior(revealing_model, chain4):
    with pytest.raises(ParameterError):
        build_oom(revealing_model, RevealingMode.MULTI)
    with pytest.raises(ParameterError):
        build_oom(revealing_model, weighting=PseudoInverseWeighting.OCCUPANCY)
    with pytest.raises(UnsupportedPolicyError):
        build_oom(chain4.true_model, RevealingMode.MULTI, chain4.target("pi_1"))


def test_singular_emissions_are_refused(knife_edge6):
    with pytest.raises(RevealingViolationError):
        build_oom(knife_edge6.model("M1"))


@pytest.mark.parametrize("mode", list(RevealingMode))
def test_contraction_holds_under_the_uniform_pseudo_inverse(revealing_model, uniform, mode, rng):
    oom = build_oom(revealing_model, mode, uniform)
    policy = random_memoryless(revealing_model, rng)
    for j, h in ((0, 1), (0, 2), (1, 2)):
        for _ in range(5):
            x = rng.standard_normal(oom.dimension(j + 1))
            total = operator_contraction_check(oom, x, j, h, policy)
            assert total <= oom.coefficients[j] * np.abs(x).sum() + 1e-8


def test_contraction_argument_checks(revealing_model, uniform):
    oom = build_oom(revealing_model)
    with pytest.raises(ParameterError):
        operator_contraction_check(oom, np.ones(3), 1, 1, uniform)
    with pytest.raises(ParameterError):
        operator_contraction_check(oom, np.ones(4), 0, 1, uniform)
    with pytest.raises(ParameterError):
        operator_contraction_check(oom, np.ones(3), 1, 2, uniform, prefix=[])


def test_contraction_under_a_history_dependent_policy(chain4):
    oom = build_oom(chain4.true_model)
    x = np.array([-2.0])
    for policy_id in ("pi_1", "pi_2"):
        total = operator_contraction_check(oom, x, 0, 3, chain4.target(policy_id))
        assert total <= oom.coefficients[0] * 2.0 + 1e-8


@pytest.mark.parametrize("mode", list(RevealingMode))
def test_full_check_passes(revealing_model, uniform, mode):
    report = oom_check(revealing_model, mode, uniform, rng=make_rng(4))
    assert report.passed
    assert report.contraction_vectors == 20
    assert report.to_dict()["passed"] is True


@pytest.mark.property
@given(pomdps(min_horizon=2, max_horizon=3, max_states=2, max_obs=3, revealing=GenerationRevealing.SINGLE))
def test_reconstruction_on_drawn_revealing_models(model):
    oom = build_oom(model, RevealingMode.SINGLE, spot_check=0)
    reconstruction, _ = reconstruction_residual(model, oom)
    belief, _ = belief_residuals(model, oom)
    assert reconstruction <= 1e-8
    assert belief <= 1e-8
