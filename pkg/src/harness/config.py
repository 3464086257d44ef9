import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml
from munch import Munch

from src.utils.errors import ParameterError
from src.utils.settings_manager import DEFAULT_SINGULAR_CUTOFF
from src.utils.types import RevealingMode

# Built-in sweeps; a config file only needs to override what differs.
EXPERIMENT_DEFAULTS = {
    "theorem3-separation": {"horizons": [20], "sample_sizes": [10_000], "seeds": 100},
    "theorem6-knife-edge": {"horizons": [6, 12], "sample_sizes": [500], "seeds": 50, "threshold": 10.0},
    "mle-rate": {"horizons": [5], "sample_sizes": [100, 1_000, 10_000], "seeds": 20, "options": {"bundle_seed": 0}},
    "importance-sampling-contrast": {"horizons": [8], "sample_sizes": [10_000], "seeds": 50},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One sweep over (horizon, sample size, seed index).

    `seeds` is the list of seed indices; a count n in a config file expands to range(n).
    `threshold` is the revealing bound handed to the pre-filter of experiments that use one.
    `singular_cutoff` and `likelihood_floor` reach every model-based row; the CLI fills them
    from the settings file when the document leaves them out.
    """

    name: str
    horizons: tuple[int, ...]
    sample_sizes: tuple[int, ...]
    seeds: tuple[int, ...]
    mode: RevealingMode = RevealingMode.SINGLE
    threshold: float = 10.0
    output: Optional[str] = None
    workers: int = 1
    base_seed: int = 0
    singular_cutoff: float = DEFAULT_SINGULAR_CUTOFF
    likelihood_floor: Optional[float] = None
    options: Munch = field(default_factory=Munch)

    def __post_init__(self):
        object.__setattr__(self, "mode", RevealingMode(self.mode))
        object.__setattr__(self, "options", Munch(self.options or {}))
        try:
            object.__setattr__(self, "singular_cutoff", float(self.singular_cutoff))
            if self.likelihood_floor is not None:
                object.__setattr__(self, "likelihood_floor", float(self.likelihood_floor))
        except (TypeError, ValueError) as e:
            raise ParameterError(f"experiment {self.name}: {e}")
        for label in ("horizons", "sample_sizes", "seeds"):
            values = tuple(int(v) for v in getattr(self, label))
            if not values:
                raise ParameterError(f"experiment {self.name}: '{label}' must not be empty")
            object.__setattr__(self, label, values)
        if min(self.sample_sizes) < 1:
            raise ParameterError(f"experiment {self.name}: sample sizes must be positive")
        if min(self.seeds) < 0:
            raise ParameterError(f"experiment {self.name}: seed indices must be non-negative")
        if not self.threshold > 0:
            raise ParameterError(f"experiment {self.name}: threshold must be positive, got {self.threshold}")
        if self.workers < 1:
            raise ParameterError(f"experiment {self.name}: workers must be at least 1, got {self.workers}")
        if not 0 < self.singular_cutoff < 1:
            raise ParameterError(f"experiment {self.name}: singular_cutoff must lie in (0, 1), got {self.singular_cutoff}")
        if self.likelihood_floor is not None and not 0 < self.likelihood_floor <= 1:
            raise ParameterError(f"experiment {self.name}: likelihood_floor must lie in (0, 1], got {self.likelihood_floor}")

    @classmethod
    def from_dict(cls, document: dict[str, Any], fallback: Optional[dict[str, Any]] = None) -> "ExperimentConfig":
        """Built-in defaults of the named sweep, overridden by `document`; `fallback` fills keys neither sets."""
        document = Munch(document)
        if "name" not in document:
            raise ParameterError("experiment configuration needs a 'name'")
        merged = Munch({**(fallback or {}), **EXPERIMENT_DEFAULTS.get(document.name, {}), **document})
        if isinstance(merged.get("seeds"), int):
            merged.seeds = list(range(merged.seeds))
        missing = [key for key in ("horizons", "sample_sizes", "seeds") if key not in merged]
        if missing:
            raise ParameterError(f"experiment {document.name} has no built-in defaults and misses {missing}")
        unknown = set(merged) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**merged)

    @classmethod
    def defaults(cls, name: str, fallback: Optional[dict[str, Any]] = None) -> "ExperimentConfig":
        if name not in EXPERIMENT_DEFAULTS:
            raise ParameterError(f"no built-in experiment named '{name}', known: {sorted(EXPERIMENT_DEFAULTS)}")
        return cls.from_dict({"name": name}, fallback)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "horizons": list(self.horizons),
            "sample_sizes": list(self.sample_sizes),
            "seeds": list(self.seeds),
            "mode": self.mode.value,
            "threshold": self.threshold,
            "output": self.output,
            "workers": self.workers,
            "base_seed": self.base_seed,
            "singular_cutoff": self.singular_cutoff,
            "likelihood_floor": self.likelihood_floor,
            "options": self.options.toDict(),
        }


def load_experiment_config(path, fallback: Optional[dict[str, Any]] = None) -> ExperimentConfig:
    """Read a YAML (or JSON) experiment document."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        logging.error(f"Failed to read experiment config {path}: {e}")
        raise
    try:
        document = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ParameterError(f"cannot parse experiment config {path}: {e}")
    if not isinstance(document, dict):
        raise ParameterError(f"experiment config {path} must be a mapping")
    return ExperimentConfig.from_dict(document, fallback)
