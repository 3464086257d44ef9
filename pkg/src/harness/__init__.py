from src.harness.config import ExperimentConfig, load_experiment_config
from src.harness.runner import ExperimentResult, run_experiment, summarize
from src.harness.validate import ValidationReport, validate_files

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "ValidationReport",
    "load_experiment_config",
    "run_experiment",
    "summarize",
    "validate_files",
]
