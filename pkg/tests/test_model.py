import numpy as np
import pytest

from src.constructions.hardness import branching_chain
from src.pomdp_core.model import TabularPomdp
from src.utils.errors import StructuralError


def _two_step(**overrides) -> dict:
    fields = dict(
        horizon=2,
        state_counts=[2, 2],
        action_count=1,
        obs_counts=[2, 2],
        initial_dist=[0.5, 0.5],
        transitions=[[[[0.9, 0.2], [0.1, 0.8]]]],
        emissions=[np.eye(2), np.eye(2)],
        rewards=[[0.0, 1.0], [1.0, 0.0]],
    )
    fields.update(overrides)
    return fields


def test_valid_model_exposes_per_step_accessors():
    model = TabularPomdp(**_two_step(name="toy"))
    assert model.transition(1, 0).shape == (2, 2)
    assert model.emission(2).shape == (2, 2)
    assert model.reward(1).tolist() == [0.0, 1.0]
    assert model.enumeration_size() == 4
    assert model.enumeration_size(1) == 2
    assert model.dense_size() == 4 + 4 + 4


def test_arrays_are_read_only():
    model = TabularPomdp(**_two_step())
    with pytest.raises(ValueError):
        model.transitions[0][0, 0, 0] = 1.0


def test_non_stochastic_transition_column_names_its_coordinates():
    with pytest.raises(StructuralError) as error:
        TabularPomdp(**_two_step(transitions=[[[[0.5, 0.5], [0.5, 0.4]]]]))
    assert any("(h=1, a=0, s=1)" in v for v in error.value.violations)


def test_shape_mismatch_is_reported():
    with pytest.raises(StructuralError) as error:
        TabularPomdp(**_two_step(emissions=[np.eye(2), np.eye(3)]))
    assert any("emissions[h=2]" in v for v in error.value.violations)


def test_rewards_outside_unit_interval_are_rejected():
    with pytest.raises(StructuralError, match="outside"):
        TabularPomdp(**_two_step(rewards=[[0.0, 1.5], [1.0, 0.0]]))


def test_negative_initial_mass_is_rejected():
    with pytest.raises(StructuralError, match="initial_dist"):
        TabularPomdp(**_two_step(initial_dist=[1.5, -0.5]))


def test_wrong_number_of_steps():
    with pytest.raises(StructuralError, match="transitions has 0 steps"):
        TabularPomdp(**_two_step(transitions=[]))


def test_variable_state_spaces_are_supported():
    model = branching_chain(5)
    assert model.state_counts == (1, 1, 1, 1, 2)
    assert model.transition(4, 1).shape == (2, 1)


def test_shares_observables_ignores_state_spaces():
    first = branching_chain(4)
    second = TabularPomdp(**_two_step())
    assert first.shares_observables_with(first.renamed("copy"))
    assert not first.shares_observables_with(second)


def test_renamed_keeps_parameters():
    model = TabularPomdp(**_two_step(name="a"))
    copy = model.renamed("b")
    assert copy.name == "b"
    assert np.array_equal(copy.transitions[0], model.transitions[0])
