import json

import numpy as np
import pytest
import yaml

from src.harness import ExperimentConfig, load_experiment_config, run_experiment, summarize, validate_files
from src.harness.cli import main
from src.harness.experiments import EXPERIMENTS
from src.pomdp_core.io import dumps_dataset, dumps_model, dumps_policy, load_model
from src.pomdp_core.simulate import sample_dataset
from src.pomdp_core.trajectory import Dataset, Trajectory
from src.utils.errors import ParameterError
from src.utils.file_storage import FileStorage

SMALL_SEPARATION = {"name": "theorem3-separation", "horizons": [4], "sample_sizes": [50], "seeds": [0, 1]}


def _stdout_json(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


def test_built_in_defaults():
    config = ExperimentConfig.defaults("theorem3-separation")
    assert config.horizons == (20,)
    assert config.sample_sizes == (10_000,)
    assert config.seeds == tuple(range(100))
    knife_edge = ExperimentConfig.defaults("theorem6-knife-edge")
    assert knife_edge.horizons == (6, 12) and knife_edge.threshold == 10.0
    assert ExperimentConfig.defaults("mle-rate").options.bundle_seed == 0
    with pytest.raises(ParameterError):
        ExperimentConfig.defaults("nonexistent")


def test_documents_override_defaults():
    config = ExperimentConfig.from_dict({"name": "theorem6-knife-edge", "seeds": 3, "workers": 2, "mode": "multi"})
    assert config.seeds == (0, 1, 2)
    assert config.horizons == (6, 12)
    assert config.workers == 2
    assert config.mode.value == "multi"
    assert ExperimentConfig.from_dict(config.to_dict()) == config


@pytest.mark.parametrize(
    "document",
    [
        {},
        {"name": "custom", "horizons": [3]},
        {"name": "theorem3-separation", "colour": "blue"},
        {"name": "theorem3-separation", "horizons": []},
        {"name": "theorem3-separation", "sample_sizes": [0]},
        {"name": "theorem3-separation", "seeds": [-1]},
        {"name": "theorem3-separation", "threshold": 0},
        {"name": "theorem3-separation", "workers": 0},
    ],
)
def test_invalid_documents(document):
    with pytest.raises(ParameterError):
        ExperimentConfig.from_dict(document)


def test_config_files(tmp_path):
    path = tmp_path / "sweep.yaml"
    path.write_text(yaml.safe_dump(SMALL_SEPARATION))
    assert load_experiment_config(path).seeds == (0, 1)
    as_json = tmp_path / "sweep.json"
    as_json.write_text(json.dumps({**SMALL_SEPARATION, "seeds": 4}))
    assert load_experiment_config(as_json).seeds == (0, 1, 2, 3)
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n")
    with pytest.raises(ParameterError):
        load_experiment_config(listing)
    with pytest.raises(OSError):
        load_experiment_config(tmp_path / "missing.yaml")


def test_separation_sweep(tmp_path):
    config = ExperimentConfig.from_dict(SMALL_SEPARATION)
    result = run_experiment(config, FileStorage.local(str(tmp_path)))
    table = result.table
    assert len(table) == 10
    assert table["error"].isna().all()
    model_based = table[table["method"] == "model-based-mle"].set_index(["seed", "policy"])
    assert model_based.loc[(0, "pi_1"), "estimate"] == 1.0
    assert model_based.loc[(1, "pi_2"), "estimate"] == 0.0
    assert (model_based["absError"] == 0.0).all()
    assert (model_based["selectedModel"] == "Mstar").all()
    oracle = table[table["method"] == "restricted-oracle"]
    assert oracle["policy"].tolist() == ["pi_1|pi_2", "pi_1|pi_2"]
    assert (tmp_path / "theorem3-separation.csv").read_text() == result.to_csv()
    summary = json.loads((tmp_path / "theorem3-separation.summary.json").read_text())
    assert summary["rows"] == 10 and summary["errors"] == 0
    assert summary["config"]["name"] == "theorem3-separation"


def test_sweeps_do_not_depend_on_the_worker_count():
    single = run_experiment(ExperimentConfig.from_dict({**SMALL_SEPARATION, "workers": 1}))
    pooled = run_experiment(ExperimentConfig.from_dict({**SMALL_SEPARATION, "workers": 3}))
    assert single.to_csv() == pooled.to_csv()


def test_knife_edge_sweep():
    config = ExperimentConfig.from_dict({"name": "theorem6-knife-edge", "horizons": [4], "sample_sizes": [20], "seeds": [0]})
    table = run_experiment(config).table
    prefiltered = table[table["method"] == "model-based-mle+prefilter"].iloc[0]
    assert prefiltered["error"].startswith("EmptyModelClassError")
    unfiltered = table[table["method"] == "model-based-mle"].iloc[0]
    assert unfiltered["selectedModel"] == "M1"
    assert unfiltered["estimate"] == 0.0
    assert unfiltered["absError"] == 0.0
    assert "logLikelihoodGap" in json.loads(unfiltered["coefficients"])


def test_failing_cells_are_recorded():
    config = ExperimentConfig.from_dict({"name": "mle-rate", "horizons": [4], "sample_sizes": [10], "seeds": [0]})
    table = run_experiment(config).table
    assert table["method"].tolist() == ["setup"]
    assert table["error"].iloc[0].startswith("ParameterError")
    with pytest.raises(ParameterError):
        run_experiment(ExperimentConfig.from_dict({"name": "custom", "horizons": [3], "sample_sizes": [1], "seeds": [0]}))


def test_summary_groups():
    result = run_experiment(ExperimentConfig.from_dict(SMALL_SEPARATION))
    groups = {(g["policy"], g["method"]): g for g in summarize(result.table)["groups"]}
    assert len(groups) == 5
    assert all(g["count"] == 2 for g in groups.values())
    assert groups[("pi_1", "model-based-mle")]["estimate"]["median"] == 1.0
    assert 0.0 <= groups[("pi_1|pi_2", "restricted-oracle")]["equalTranscriptFraction"] <= 1.0
    assert groups[("pi_1|pi_2", "restricted-oracle")]["estimate"]["mean"] is None


@pytest.mark.slow
def test_model_based_error_vanishes_with_more_data():
    config = ExperimentConfig.from_dict({"name": "mle-rate", "sample_sizes": [100, 10_000], "seeds": 10, "workers": 4})
    table = run_experiment(config).table
    assert table["error"].isna().all()
    medians = table.groupby("n")["absError"].median()
    assert medians[10_000] <= 1e-12
    assert medians[10_000] <= medians[100]


def test_validation_of_generated_files(tmp_path, revealing_model, uniform):
    data = sample_dataset(revealing_model, uniform, 10, seed=0)
    (tmp_path / "model.json").write_text(dumps_model(revealing_model))
    (tmp_path / "uniform.json").write_text(dumps_policy(uniform))
    (tmp_path / "data.txt").write_text(dumps_dataset(data))
    report = validate_files([tmp_path / "model.json", tmp_path / "uniform.json", tmp_path / "data.txt"])
    assert report.valid
    assert [f.kind for f in report.files] == ["model", "policy", "dataset"]


def test_validation_reports_violations(tmp_path, revealing_model):
    broken = Dataset(np.full((1, 3), 7), np.zeros((1, 3)), np.zeros((1, 3)))
    (tmp_path / "broken.txt").write_text(dumps_dataset(broken))
    (tmp_path / "other.json").write_text(json.dumps({"hello": 1}))
    (tmp_path / "bad.json").write_text("{")
    report = validate_files(
        [tmp_path / "broken.txt", tmp_path / "other.json", tmp_path / "bad.json", tmp_path / "missing.txt"],
        model=revealing_model,
    )
    assert not report.valid
    kinds = [f.kind for f in report.files]
    assert kinds == ["dataset", "unknown", "unknown", "unreadable"]
    assert any("out of range" in v for v in report.files[0].violations)
    assert report.to_dict()["valid"] is False


def test_cli_generates_and_inspects_the_chain(home, capsys):
    assert main(["--out", "chain", "gen", "theorem3", "--horizon", "4"]) == 0
    written = _stdout_json(capsys)["written"]
    assert set(written) == {"Mstar.json", "policies/pi_b.json", "policies/pi_1.json", "policies/pi_2.json", "expected.json"}
    assert json.loads((home / "chain" / "expected.json").read_text())["values"]["pi_1"] == 1.0

    assert main(["coverage", "--model", "chain/Mstar.json", "--behavior", "chain/policies/pi_b.json"]) == 0
    assert _stdout_json(capsys)["cA"] == 2.0

    assert main(["oom-check", "--model", "chain/Mstar.json"]) == 0
    assert _stdout_json(capsys)["passed"] is True

    arguments = ["ope", "--models", "chain/Mstar.json", "--true-index", "0", "--target", "chain/policies/pi_1.json"]
    assert main([*arguments, "--method", "true-value"]) == 0
    assert _stdout_json(capsys)["estimate"] == 1.0
    assert main(["--cap", "2", *arguments, "--method", "true-value"]) == 2
    assert (home / ".pomdp-ope" / "app.log").exists()


def test_cli_knife_edge_workflow(home, capsys):
    assert main(["--out", "knife", "gen", "theorem6", "--horizon", "4"]) == 0
    capsys.readouterr()
    sample = ["--out", "knife", "--seed", "1", "sample", "--model", "knife/Mstar.json",
              "--policy", "knife/policies/pi_b.json", "--n", "30"]
    assert main(sample) == 0
    assert (home / "knife" / "dataset.txt").read_text().startswith("n=30 seed=1 policy=pi_b")

    ope = ["ope", "--models", "knife/M1.json", "knife/M2.json", "--behavior", "knife/policies/pi_b.json",
           "--target", "knife/policies/always_R.json", "--data", "knife/dataset.txt"]
    assert main([*ope, "--threshold", "10"]) == 3
    assert main(ope) == 0
    result = _stdout_json(capsys)
    assert result["selectedModelIndex"] == 0
    assert result["estimate"] == 0.0
    assert main([*ope[:-2], "--method", "importance-sampling"]) == 1


def test_cli_validate(home, capsys, revealing_model):
    (home / "model.json").write_text(dumps_model(revealing_model))
    (home / "broken.json").write_text(json.dumps({"transitions": []}))
    assert main(["validate", "model.json"]) == 0
    assert _stdout_json(capsys)["valid"] is True
    assert main(["validate", "broken.json"]) == 1
    assert _stdout_json(capsys)["files"][0]["violations"]


def test_cli_experiment_from_config(home, capsys):
    (home / "sweep.yaml").write_text(yaml.safe_dump(SMALL_SEPARATION))
    assert main(["--out", "results", "experiment", "--config", "sweep.yaml"]) == 0
    assert _stdout_json(capsys)["rows"] == 10
    assert (home / "results" / "theorem3-separation.csv").exists()


def test_settings_fill_experiment_defaults():
    fallback = {"workers": 3, "singular_cutoff": 1e-6, "likelihood_floor": 1e-5}
    config = ExperimentConfig.from_dict({"name": "theorem6-knife-edge", "workers": 2}, fallback)
    assert config.workers == 2
    assert config.singular_cutoff == 1e-6
    assert config.likelihood_floor == 1e-5
    assert ExperimentConfig.defaults("theorem6-knife-edge").likelihood_floor is None
    with pytest.raises(ParameterError):
        ExperimentConfig.from_dict({"name": "theorem6-knife-edge", "singular_cutoff": 2.0})


def test_saved_settings_change_cli_results(home, capsys, revealing_model):
    assert main(["--out", "knife", "gen", "theorem6", "--horizon", "6"]) == 0
    truth = load_model(home / "knife" / "Mstar.json")
    trajectory = Trajectory.from_history(truth, [(0, 1)] * 5 + [(1, 1)])
    data = Dataset.from_trajectories([trajectory], 6, behavior_policy_id="pi_b")
    (home / "knife" / "all_right.txt").write_text(dumps_dataset(data))
    (home / "model.json").write_text(dumps_model(revealing_model))
    capsys.readouterr()

    ope = ["ope", "--models", "knife/M2.json", "--behavior", "knife/policies/pi_b.json",
           "--target", "knife/policies/always_R.json", "--data", "knife/all_right.txt"]
    assert main(ope) == 1
    coverage = ["coverage", "--model", "model.json", "--modes", "single"]
    assert main(coverage) == 0
    assert all(v != "inf" for v in _stdout_json(capsys)["cO"].values())

    assert main(["settings", "--set", "likelihood_floor=1e-5", "singular_cutoff=0.999999"]) == 0
    shown = _stdout_json(capsys)
    assert shown["likelihood_floor"] == 1e-5
    assert (home / ".pomdp-ope" / ".settings.yml").exists()

    assert main(ope) == 0
    result = _stdout_json(capsys)
    assert result["selectedModelIndex"] == 0
    assert result["estimate"] == 1.0
    assert main(coverage) == 0
    assert all(v == "inf" for v in _stdout_json(capsys)["cO"].values())

    assert main(["settings", "--set", "nonsense=1"]) == 1
    assert main(["settings", "--set", "likelihood_floor"]) == 1


def test_cells_that_raise_keep_a_setup_row(monkeypatch):
    def broken(config, horizon, n, seed):
        raise RuntimeError(f"cell {seed} broke")

    monkeypatch.setitem(EXPERIMENTS, "theorem3-separation", broken)
    result = run_experiment(ExperimentConfig.from_dict({**SMALL_SEPARATION, "workers": 2}))
    table = result.table
    assert table["method"].tolist() == ["setup", "setup"]
    assert table["policy"].tolist() == ["*", "*"]
    assert table["seed"].tolist() == [0, 1]
    assert table["error"].tolist() == ["RuntimeError: cell 0 broke", "RuntimeError: cell 1 broke"]
    assert result.summary["errors"] == 2


@pytest.mark.slow
def test_separation_transcripts_almost_never_differ():
    config = ExperimentConfig.from_dict(
        {"name": "theorem3-separation", "horizons": [20], "sample_sizes": [1000], "seeds": 100, "workers": 4}
    )
    result = run_experiment(config)
    assert result.summary["errors"] == 0
    groups = {(g["policy"], g["method"]): g for g in result.summary["groups"]}
    assert groups[("pi_1|pi_2", "restricted-oracle")]["equalTranscriptFraction"] >= 0.95
    model_based = result.table[result.table["method"] == "model-based-mle"]
    assert (model_based["absError"] == 0.0).all()


@pytest.mark.slow
def test_importance_sampling_varies_where_the_model_is_exact():
    config = ExperimentConfig.from_dict({"name": "importance-sampling-contrast", "workers": 4})
    table = run_experiment(config).table
    assert table["error"].isna().all()
    spread = table.groupby("method")["estimate"].std()
    importance, model_based = spread["importance-sampling"], spread["model-based-mle"]
    assert importance > 0.0
    assert model_based == 0.0 or importance >= 10 * model_based
