import json

import numpy as np
import pytest

from src.constructions.hardness import theorem3_instance
from src.pomdp_core.io import (
    dataset_violations,
    dumps_dataset,
    dumps_model,
    dumps_policy,
    load_dataset,
    load_model,
    load_policy,
    loads_dataset,
    model_document_violations,
    policy_from_document,
)
from src.pomdp_core.simulate import sample_dataset
from src.utils.errors import StructuralError


def test_model_file_keeps_every_array(tmp_path, revealing_model):
    path = tmp_path / "model.json"
    path.write_text(dumps_model(revealing_model))
    loaded = load_model(path)
    assert loaded.name == "revealing"
    assert loaded.state_counts == revealing_model.state_counts
    for ours, theirs in zip(loaded.transitions, revealing_model.transitions):
        assert np.array_equal(ours, theirs)


def test_unnamed_model_takes_the_file_stem(tmp_path, revealing_model):
    document = json.loads(dumps_model(revealing_model))
    document.pop("name")
    path = tmp_path / "candidate-7.json"
    path.write_text(json.dumps(document))
    assert load_model(path).name == "candidate-7"


def test_model_document_violations():
    assert model_document_violations([]) == ["model document must be a JSON object"]
    assert "missing field 'rewards'" in model_document_violations(
        {k: None for k in ("horizon", "state_counts", "action_count", "obs_counts", "initial_dist", "transitions", "emissions")}
    )


def test_history_table_policy_file(tmp_path):
    bundle = theorem3_instance(5)
    path = tmp_path / "pi_2.json"
    path.write_text(dumps_policy(bundle.target("pi_2")))
    policy = load_policy(path)
    assert policy.policy_id == "pi_2"
    assert dict(policy.entries).keys() == dict(bundle.target("pi_2").entries).keys()
    assert policy.action_probs(4, ((0, 0),) * 3, 0).tolist() == [0.0, 1.0]


def test_malformed_policy_documents():
    with pytest.raises(StructuralError, match="missing field"):
        policy_from_document({"kind": "open_loop", "action_count": 2})
    with pytest.raises(ValueError):
        policy_from_document({"kind": "nonsense"})


def test_dataset_text_format(revealing_model, uniform):
    dataset = sample_dataset(revealing_model, uniform, 5, seed=3)
    text = dumps_dataset(dataset)
    header, *lines = text.splitlines()
    assert header == "n=5 seed=3 policy=uniform"
    assert len(lines) == 5
    assert len(lines[0].split()) == 3 * revealing_model.horizon
    parsed = loads_dataset(text)
    assert parsed.seed == 3
    assert parsed.behavior_policy_id == "uniform"
    assert np.array_equal(parsed.observations, dataset.observations)
    assert np.array_equal(parsed.rewards, dataset.rewards)


def test_dataset_parse_errors():
    with pytest.raises(StructuralError, match="header line"):
        loads_dataset("")
    with pytest.raises(StructuralError, match="declares n=2"):
        loads_dataset("n=2 seed=0 policy=p\n0 0 0.0\n")
    with pytest.raises(StructuralError, match="triples"):
        loads_dataset("n=1 seed=0 policy=p\n0 0\n")
    with pytest.raises(StructuralError, match="expected 2"):
        loads_dataset("n=1 seed=0 policy=p\n0 0 0.0\n", horizon=2)


def test_dataset_violations_name_trajectory_and_step(tmp_path, revealing_model):
    path = tmp_path / "data.txt"
    path.write_text("n=2 seed=0 policy=p\n0 0 0.5 0 0 0.5 0 0 0.5\n0 0 0.5 7 0 0.5 0 0 0.5\n")
    violations = dataset_violations(load_dataset(path), revealing_model)
    assert "trajectory 1: observation 7 at step 2 out of range" in violations


def test_dataset_rewards_must_match_the_model(revealing_model, uniform):
    dataset = sample_dataset(revealing_model, uniform, 3, seed=0)
    text = dumps_dataset(dataset)
    header, first, *rest = text.splitlines()
    tokens = first.split()
    tokens[2] = "2.0"
    broken = loads_dataset("\n".join([header, " ".join(tokens), *rest]))
    violations = dataset_violations(broken, revealing_model)
    assert len(violations) == 1
    assert violations[0].startswith("trajectory 0: reward 2 at step 1")
