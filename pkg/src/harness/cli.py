import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import yaml

from src.constructions.bundle import HardnessBundle
from src.constructions.hardness import theorem3_instance, theorem6_instance
from src.constructions.random_models import RandomPomdpSpec, mle_rate_bundle, random_pomdp
from src.coverage.coefficients import occupancy_ratio_bound
from src.coverage.report import coverage_report
from src.estimators.effective_coverage import effective_coverage
from src.estimators.likelihood import eps_approx
from src.estimators.model_class import ModelClass
from src.estimators.ope import importance_sampling_ope, log_likelihood_table, model_based_ope, true_value_result
from src.harness.config import EXPERIMENT_DEFAULTS, ExperimentConfig, load_experiment_config
from src.harness.runner import run_experiment
from src.harness.validate import validate_files
from src.oom.checks import oom_check
from src.pomdp_core.inference import trajectory_tv_distance
from src.pomdp_core.io import dumps_dataset, dumps_model, dumps_policy, load_dataset, load_model, load_policy
from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy
from src.pomdp_core.simulate import sample_dataset
from src.utils.errors import ParameterError, PomdpOpeError
from src.utils.file_storage import FileStorage
from src.utils.rng import make_rng
from src.utils.settings_manager import DEFAULT_SETTINGS, NUMERIC_SETTINGS, SettingsManager
from src.utils.types import CoverageMode, PseudoInverseWeighting, RevealingMode


def configure_logging(log_level_str: str) -> None:
    """Root logger with a stderr stream handler and a file handler in ~/.pomdp-ope/app.log."""
    log_level = getattr(logging, log_level_str.upper(), logging.INFO)
    logger = logging.getLogger()
    logger.setLevel(log_level)
    for handler in [h for h in logger.handlers if getattr(h, "pomdp_ope", False)]:
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter("%(asctime)s [%(levelname)s] %(message)s")
    stream_handler = logging.StreamHandler(sys.stderr)
    handlers = [stream_handler]
    try:
        app_dir = Path.home() / ".pomdp-ope"
        app_dir.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(app_dir / "app.log", mode="w"))
    except Exception as e:
        logger.error(f"Failed to create file handler: {e}")
    for handler in handlers:
        handler.setLevel(log_level)
        handler.setFormatter(formatter)
        handler.pomdp_ope = True
        logger.addHandler(handler)
    logger.debug(f"Logging initialized with level: {log_level_str}")


def _emit(document) -> None:
    print(json.dumps(document, indent=1))


def _storage(args, settings, default_subdir: str = "") -> FileStorage:
    base = Path(args.out) if args.out else Path(settings.output_dir) / default_subdir
    return FileStorage.local(str(base))


def _render(value: float):
    return "inf" if value == float("inf") else value


def _behavior(path: Optional[str], model: TabularPomdp) -> Policy:
    return load_policy(path) if path else Policy.uniform(model)


# Subcommands


def _save_bundle(bundle: HardnessBundle, storage: FileStorage) -> list[str]:
    written = []
    models = {bundle.true_model.name: bundle.true_model}
    models.update({m.name: m for m in bundle.model_class.models})
    for name, model in models.items():
        storage.save_text(f"{name}.json", dumps_model(model))
        written.append(f"{name}.json")
    for policy in (bundle.behavior_policy, *bundle.target_policies):
        storage.save_text(f"policies/{policy.policy_id}.json", dumps_policy(policy))
        written.append(f"policies/{policy.policy_id}.json")
    storage.save_text("expected.json", json.dumps(bundle.expected_document(), indent=1))
    written.append("expected.json")
    return written


def cmd_gen(args, settings) -> int:
    storage = _storage(args, settings, args.instance)
    if args.instance == "random":
        if not args.spec:
            raise ParameterError("gen random needs --spec")
        text = Path(args.spec).read_text(encoding="utf-8")
        document = json.loads(text) if args.spec.endswith(".json") else yaml.safe_load(text)
        model = random_pomdp(RandomPomdpSpec.from_dict(document), make_rng(args.seed), name=f"random-{args.seed}")
        storage.save_text(f"{model.name}.json", dumps_model(model))
        _emit({"written": [f"{model.name}.json"]})
        return 0
    if args.instance == "mle-rate":
        bundle = mle_rate_bundle(args.seed)
    else:
        if args.horizon is None:
            raise ParameterError(f"gen {args.instance} needs --horizon")
        build = theorem3_instance if args.instance == "theorem3" else theorem6_instance
        bundle = build(args.horizon, cap=args.cap)
    _emit({"bundle": bundle.name, "written": _save_bundle(bundle, storage)})
    return 0


def cmd_coverage(args, settings) -> int:
    model = load_model(args.model)
    behavior = _behavior(args.behavior, model)
    rng = make_rng(args.seed) if args.mc_samples else None
    report = coverage_report(
        model, behavior, args.modes, mc_samples=args.mc_samples, rng=rng, cap=args.cap, cutoff=args.cutoff
    )
    _emit(report.to_dict())
    return 0


def cmd_oom_check(args, settings) -> int:
    model = load_model(args.model)
    behavior = load_policy(args.behavior) if args.behavior else None
    report = oom_check(
        model,
        mode=args.mode,
        behavior=behavior,
        weighting=args.weighting,
        contraction_vectors=args.vectors,
        rng=make_rng(args.seed),
        cap=args.cap,
        spot_check=args.spot_check,
        cutoff=args.cutoff,
    )
    _emit(report.to_dict())
    return 0 if report.passed else 1


def cmd_sample(args, settings) -> int:
    model = load_model(args.model)
    policy = load_policy(args.policy)
    dataset = sample_dataset(model, policy, args.n, seed=args.seed)
    text = dumps_dataset(dataset)
    if args.out:
        _storage(args, settings).save_text(args.name, text)
        logging.info(f"Wrote {dataset.n} trajectories to {Path(args.out) / args.name}")
    else:
        sys.stdout.write(text)
    return 0


def _model_class(args) -> ModelClass:
    return ModelClass(tuple(load_model(path) for path in args.models), true_index=args.true_index)


def cmd_ope(args, settings) -> int:
    models = _model_class(args)
    target = load_policy(args.target)
    behavior = _behavior(args.behavior, models[0])
    if args.method == "true-value":
        result = true_value_result(models, target, cap=args.cap)
    else:
        if not args.data:
            raise ParameterError(f"--method {args.method} needs --data")
        data = load_dataset(args.data, horizon=models[0].horizon)
        if args.method == "importance-sampling":
            result = importance_sampling_ope(data, target, behavior)
        else:
            result = model_based_ope(
                models,
                behavior,
                target,
                data,
                mode=args.mode,
                threshold=args.threshold,
                floor=args.floor,
                cap=args.cap,
                cutoff=args.cutoff,
            )
    _emit(result.to_dict())
    return 0


def cmd_diagnose(args, settings) -> int:
    truth = load_model(args.true_model)
    models = [load_model(path) for path in args.models]
    behavior = _behavior(args.behavior, truth)
    target = load_policy(args.target)
    document = {
        "coverage": coverage_report(truth, behavior, cap=args.cap, cutoff=args.cutoff).to_dict(),
        "occupancyRatioBound": _render(occupancy_ratio_bound(truth, target, behavior, cap=args.cap))
        if target.is_memoryless and behavior.is_memoryless
        else None,
        "models": [],
    }
    data = load_dataset(args.data, horizon=truth.horizon) if args.data else None
    if data is not None:
        document["logLikelihoods"] = log_likelihood_table(models, behavior, data, args.floor)
        document["epsApprox"] = eps_approx(models, truth, behavior, data, args.floor)
    for model in models:
        entry = {"name": model.name}
        entry["tvDistance"] = trajectory_tv_distance(truth, model, behavior, cap=args.cap)
        try:
            coverage = effective_coverage(truth, model, target, behavior, args.mode, tighter=args.tighter, cap=args.cap)
            entry["cEff"] = coverage.to_dict()
        except PomdpOpeError as e:
            entry["cEff"] = f"{type(e).__name__}: {e}"
        document["models"].append(entry)
    _emit(document)
    return 0


def cmd_experiment(args, settings) -> int:
    fallback = {
        "workers": args.default_workers,
        "singular_cutoff": args.cutoff,
        "likelihood_floor": args.likelihood_floor,
    }
    if args.config:
        config = load_experiment_config(args.config, fallback)
    elif args.name:
        config = ExperimentConfig.defaults(args.name, fallback)
    else:
        raise ParameterError(f"experiment needs a name or --config, known names: {sorted(EXPERIMENT_DEFAULTS)}")
    overrides = {}
    if args.workers:
        overrides["workers"] = args.workers
    if args.seed:
        overrides["base_seed"] = args.seed
    if overrides:
        config = ExperimentConfig.from_dict({**config.to_dict(), **overrides})
    output = args.out or config.output or str(Path(settings.output_dir) / config.name)
    result = run_experiment(config, FileStorage.local(output))
    _emit(result.summary)
    return 0


def cmd_settings(args, settings) -> int:
    settings_manager = SettingsManager()
    for assignment in args.set or []:
        key, separator, raw = assignment.partition("=")
        if not separator:
            raise ParameterError(f"--set expects key=value, got '{assignment}'")
        key = key.strip()
        settings_manager.set_settings_key(key, yaml.safe_load(raw))
        if key in NUMERIC_SETTINGS:
            number = settings_manager.get_number(key, NUMERIC_SETTINGS[key], allow_none=DEFAULT_SETTINGS[key] is None)
            settings_manager.set_settings_key(key, number)
    if args.set:
        settings_manager.save_settings()
        logging.info(f"Saved {len(args.set)} settings to {settings_manager.write_path}")
    _emit(settings_manager.get_settings().toDict())
    return 0


def cmd_validate(args, settings) -> int:
    model = load_model(args.model) if args.model else None
    report = validate_files(args.paths, model=model)
    _emit(report.to_dict())
    return 0 if report.valid else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pomdp-ope", description="Tabular POMDP off-policy evaluation laboratory")

    # Create a mutually exclusive group to ensure only one log level is set
    log_group = parser.add_mutually_exclusive_group()
    for flag, level in (("-D", "DEBUG"), ("-I", "INFO"), ("-W", "WARNING"), ("-E", "ERROR"), ("-C", "CRITICAL")):
        log_group.add_argument(flag, action="store_const", const=level, dest="log_level", help=f"Set log level to {level}")
    parser.set_defaults(log_level="INFO")

    parser.add_argument("--seed", type=int, default=0, help="Seed for sampling, generation and random checks")
    parser.add_argument("--cap", type=int, default=None, help="Enumeration cap override")
    parser.add_argument("--out", default=None, help="Output directory")

    subparsers = parser.add_subparsers(dest="command", required=True)

    gen = subparsers.add_parser("gen", help="Generate a construction or a random instance")
    gen.add_argument("instance", choices=["theorem3", "theorem6", "random", "mle-rate"])
    gen.add_argument("--horizon", type=int)
    gen.add_argument("--spec", help="YAML or JSON random-model spec")
    gen.set_defaults(handler=cmd_gen)

    coverage = subparsers.add_parser("coverage", help="Coverage and revealing coefficients")
    coverage.add_argument("--model", required=True)
    coverage.add_argument("--behavior", help="Behavior policy file, uniform when omitted")
    coverage.add_argument("--modes", nargs="+", default=[CoverageMode.ALL.value], choices=[m.value for m in CoverageMode])
    coverage.add_argument("--mc-samples", type=int, default=None)
    coverage.set_defaults(handler=cmd_coverage)

    oom = subparsers.add_parser("oom-check", help="Build the operator model and run its identity checks")
    oom.add_argument("--model", required=True)
    oom.add_argument("--mode", default=RevealingMode.SINGLE.value, choices=[m.value for m in RevealingMode])
    oom.add_argument("--behavior", help="Memoryless behavior policy file (multi mode, occupancy weighting)")
    oom.add_argument("--weighting", default=PseudoInverseWeighting.UNIFORM.value, choices=[w.value for w in PseudoInverseWeighting])
    oom.add_argument("--vectors", type=int, default=20)
    oom.set_defaults(handler=cmd_oom_check)

    sample = subparsers.add_parser("sample", help="Sample a dataset")
    sample.add_argument("--model", required=True)
    sample.add_argument("--policy", required=True)
    sample.add_argument("--n", type=int, required=True)
    sample.add_argument("--name", default="dataset.txt", help="File name inside --out")
    sample.set_defaults(handler=cmd_sample)

    ope = subparsers.add_parser("ope", help="Off-policy evaluation")
    ope.add_argument("--models", nargs="+", required=True)
    ope.add_argument("--true-index", type=int, default=None)
    ope.add_argument("--behavior")
    ope.add_argument("--target", required=True)
    ope.add_argument("--data")
    ope.add_argument("--method", default="model-based-mle", choices=["model-based-mle", "importance-sampling", "true-value"])
    ope.add_argument("--mode", default=RevealingMode.SINGLE.value, choices=[m.value for m in RevealingMode])
    ope.add_argument("--threshold", type=float, default=None)
    ope.add_argument("--floor", type=float, default=None)
    ope.set_defaults(handler=cmd_ope)

    diagnose = subparsers.add_parser("diagnose", help="Coverage, TV distance and effective coverage of candidates")
    diagnose.add_argument("--true-model", required=True)
    diagnose.add_argument("--models", nargs="+", required=True)
    diagnose.add_argument("--behavior")
    diagnose.add_argument("--target", required=True)
    diagnose.add_argument("--data")
    diagnose.add_argument("--mode", default=RevealingMode.SINGLE.value, choices=[m.value for m in RevealingMode])
    diagnose.add_argument("--tighter", action="store_true")
    diagnose.add_argument("--floor", type=float, default=None)
    diagnose.set_defaults(handler=cmd_diagnose)

    experiment = subparsers.add_parser("experiment", help="Run a registered experiment sweep")
    experiment.add_argument("name", nargs="?", choices=sorted(EXPERIMENT_DEFAULTS))
    experiment.add_argument("--config")
    experiment.add_argument("--workers", type=int, default=None)
    experiment.set_defaults(handler=cmd_experiment)

    settings_parser = subparsers.add_parser("settings", help="Show the settings, or change and save them")
    settings_parser.add_argument("--set", nargs="+", metavar="KEY=VALUE", help="Values are read as YAML scalars")
    settings_parser.set_defaults(handler=cmd_settings)

    validate = subparsers.add_parser("validate", help="Structural validation of model, policy and dataset files")
    validate.add_argument("paths", nargs="+")
    validate.add_argument("--model", help="Model that policies and datasets are checked against")
    validate.set_defaults(handler=cmd_validate)
    return parser


def _resolve_numeric_settings(args, settings_manager: SettingsManager) -> None:
    """Settings fill whatever the command line leaves unset."""
    if args.cap is None:
        args.cap = settings_manager.get_number("enumeration_cap", int)
    args.cutoff = settings_manager.get_number("singular_cutoff")
    args.spot_check = settings_manager.get_number("spot_check_trajectories", int)
    args.default_workers = settings_manager.get_number("workers", int)
    args.likelihood_floor = settings_manager.get_number("likelihood_floor", allow_none=True)
    if getattr(args, "floor", None) is None:
        args.floor = args.likelihood_floor


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    try:
        settings_manager = SettingsManager()
        settings = settings_manager.get_settings()
        if args.handler is not cmd_settings:
            _resolve_numeric_settings(args, settings_manager)
        return args.handler(args, settings)
    except PomdpOpeError as e:
        logging.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except OSError as e:
        logging.error(f"{e}")
        return 1
