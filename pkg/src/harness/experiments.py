"""
Registered experiment sweeps.

Each handler turns one (horizon, sample size, seed index) cell into result rows.
Handlers never raise: a failing row keeps its keys and records `type: message`
in the `error` column.
"""

import json
import logging
import math
from functools import lru_cache
from typing import Any, Callable, Optional

import numpy as np

from src.constructions.bundle import HardnessBundle
from src.constructions.hardness import theorem3_instance, theorem6_instance
from src.constructions.random_models import MLE_RATE_HORIZON, mle_rate_bundle
from src.estimators.likelihood import class_log_likelihoods
from src.estimators.ope import importance_sampling_ope, model_based_ope, restricted_policy_oracle
from src.harness.config import ExperimentConfig
from src.pomdp_core.simulate import sample_dataset
from src.pomdp_core.trajectory import Dataset
from src.utils.errors import ParameterError
from src.utils.rng import experiment_rng
from src.utils.types import OpeMethod, RevealingMode

ROW_COLUMNS = (
    "experiment",
    "horizon",
    "n",
    "seed",
    "policy",
    "method",
    "estimate",
    "trueValue",
    "absError",
    "selectedModel",
    "coefficients",
    "transcriptsEqual",
    "error",
)
SORT_KEYS = ["experiment", "horizon", "n", "seed", "policy", "method"]
PREFILTERED_MLE = f"{OpeMethod.MODEL_BASED_MLE.value}+prefilter"
ANY_POLICY = "*"

Row = dict[str, Any]
RowHandler = Callable[[ExperimentConfig, int, int, int], list[Row]]


class RowContext:
    """Keys shared by every row of one sweep cell."""

    def __init__(self, config: ExperimentConfig, horizon: int, n: int, seed: int):
        self.config = config
        self.horizon = horizon
        self.n = n
        self.seed = seed

    def rng(self) -> np.random.Generator:
        return experiment_rng(self.config.name, self.horizon, self.n, self.seed, self.config.base_seed)

    def row(self, policy: str, method: str, **values) -> Row:
        row = {column: None for column in ROW_COLUMNS}
        row.update(experiment=self.config.name, horizon=self.horizon, n=self.n, seed=self.seed, policy=policy, method=method)
        row.update(values)
        if isinstance(row["coefficients"], dict):
            row["coefficients"] = json.dumps(row["coefficients"], sort_keys=True)
        return row

    def guarded(self, policy: str, method: str, compute: Callable[[], dict[str, Any]]) -> Row:
        try:
            return self.row(policy, method, **compute())
        except Exception as e:
            logging.debug(f"{self.config.name} H={self.horizon} n={self.n} seed={self.seed} {policy}/{method}: {e}")
            return self.row(policy, method, error=f"{type(e).__name__}: {e}")


def _scored(estimate: float, true_value: Optional[float], **values) -> dict[str, Any]:
    scored = {"estimate": estimate, **values}
    if true_value is not None:
        scored["trueValue"] = true_value
        scored["absError"] = abs(estimate - true_value)
    return scored


def _model_based(
    config: ExperimentConfig, bundle: HardnessBundle, policy_id: str, data: Dataset, **kwargs
) -> dict[str, Any]:
    target = bundle.target(policy_id)
    result = model_based_ope(
        bundle.model_class,
        bundle.behavior_policy,
        target,
        data,
        floor=config.likelihood_floor,
        cutoff=config.singular_cutoff,
        **kwargs,
    )
    true_value = bundle.expected_values.get(policy_id, result.diagnostics.get("trueValue"))
    coefficients = {
        key: value for key, value in result.diagnostics.items() if key in ("epsApprox", "tvDistance", "cEff")
    }
    return _scored(
        result.estimate,
        true_value,
        selectedModel=bundle.model_class[result.selected_model_index].name,
        coefficients=coefficients or None,
    )


def _importance_sampling(bundle: HardnessBundle, policy_id: str, data: Dataset) -> dict[str, Any]:
    result = importance_sampling_ope(data, bundle.target(policy_id), bundle.behavior_policy)
    diagnostics = {key: result.diagnostics[key] for key in ("unclippedEstimate", "standardError", "maxWeight", "effectiveSampleSize")}
    if math.isinf(diagnostics["standardError"]):
        diagnostics["standardError"] = "inf"
    return _scored(result.estimate, bundle.expected_values.get(policy_id), coefficients=diagnostics)


# Bundles are immutable, so every worker shares one instance per key.


@lru_cache(maxsize=None)
def _theorem3(horizon: int) -> HardnessBundle:
    return theorem3_instance(horizon)


@lru_cache(maxsize=None)
def _theorem6(horizon: int) -> HardnessBundle:
    return theorem6_instance(horizon)


@lru_cache(maxsize=None)
def _mle_rate(bundle_seed: int) -> HardnessBundle:
    return mle_rate_bundle(bundle_seed)


def _dataset(context: RowContext, bundle: HardnessBundle) -> Dataset:
    return sample_dataset(bundle.true_model, bundle.behavior_policy, context.n, seed=context.seed, rng=context.rng())


def _failed_cell(context: RowContext, policies: list[str], error: Exception) -> list[Row]:
    message = f"{type(error).__name__}: {error}"
    return [context.row(policy, "setup", error=message) for policy in policies]


def failed_job_rows(config: ExperimentConfig, horizon: int, n: int, seed: int, error: Exception) -> list[Row]:
    """Setup row for a cell whose handler raised instead of recording its errors."""
    return _failed_cell(RowContext(config, horizon, n, seed), [ANY_POLICY], error)


def theorem3_separation(config: ExperimentConfig, horizon: int, n: int, seed: int) -> list[Row]:
    """Model-based and importance-sampling rows for pi_1 and pi_2, plus one transcript-equality row."""
    context = RowContext(config, horizon, n, seed)
    try:
        bundle = _theorem3(horizon)
        data = _dataset(context, bundle)
    except Exception as e:
        return _failed_cell(context, ["pi_1", "pi_2"], e)
    rows = []
    for policy_id in ("pi_1", "pi_2"):
        rows.append(
            context.guarded(policy_id, OpeMethod.MODEL_BASED_MLE.value,
                            lambda: _model_based(config, bundle, policy_id, data, diagnostics=False))
        )
        rows.append(
            context.guarded(policy_id, OpeMethod.IMPORTANCE_SAMPLING.value,
                            lambda: _importance_sampling(bundle, policy_id, data))
        )

    def transcripts() -> dict[str, Any]:
        first = restricted_policy_oracle(bundle.target("pi_1"), data)
        second = restricted_policy_oracle(bundle.target("pi_2"), data)
        differing = first.differing_trajectories(second)
        return {"transcriptsEqual": first == second, "coefficients": {"differingTrajectories": int(differing.size)}}

    rows.append(context.guarded("pi_1|pi_2", OpeMethod.RESTRICTED_ORACLE.value, transcripts))
    return rows


def _contains_all_right(data: Dataset, right: int = 1) -> bool:
    return bool(np.any(np.all(data.actions[:, :-1] == right, axis=1)))


def theorem6_knife_edge(config: ExperimentConfig, horizon: int, n: int, seed: int) -> list[Row]:
    """
    Pre-filtered MLE (expected to empty the class) and unfiltered MLE on {M1, M2} for always-R.

    The unfiltered row reports J of the selected member against J_{M*}; the likelihood
    gap between the two members is zero unless the all-R action sequence was sampled.
    """
    context = RowContext(config, horizon, n, seed)
    policy_id = "always_R"
    try:
        bundle = _theorem6(horizon)
        data = _dataset(context, bundle)
    except Exception as e:
        return _failed_cell(context, [policy_id], e)
    true_value = bundle.expected_values[policy_id]

    def prefiltered() -> dict[str, Any]:
        return _model_based(config, bundle, policy_id, data, mode=RevealingMode.SINGLE, threshold=config.threshold)

    def unfiltered() -> dict[str, Any]:
        scored = _model_based(config, bundle, policy_id, data)
        scores = class_log_likelihoods(bundle.model_class, bundle.behavior_policy, data, config.likelihood_floor)
        gap = float(scores[0] - scores[1]) if np.isfinite(scores).all() else "inf"
        scored["coefficients"] = {"logLikelihoodGap": gap, "allRightSampled": _contains_all_right(data)}
        scored.update(trueValue=true_value, absError=abs(scored["estimate"] - true_value))
        return scored

    return [
        context.guarded(policy_id, PREFILTERED_MLE, prefiltered),
        context.guarded(policy_id, OpeMethod.MODEL_BASED_MLE.value, unfiltered),
    ]


def mle_rate(config: ExperimentConfig, horizon: int, n: int, seed: int) -> list[Row]:
    """Model-based rows with epsilon_approx and the exact TV distance between M-hat and M*."""
    context = RowContext(config, horizon, n, seed)
    policy_id = "previous_observation"
    try:
        if horizon != MLE_RATE_HORIZON:
            raise ParameterError(f"the MLE-rate instance has H = {MLE_RATE_HORIZON}, sweep asked for {horizon}")
        bundle = _mle_rate(int(config.options.get("bundle_seed", 0)))
        data = _dataset(context, bundle)
    except Exception as e:
        return _failed_cell(context, [policy_id], e)
    kwargs = {"mode": config.mode}
    if "threshold" in config.options:
        kwargs["threshold"] = float(config.options.threshold)
    return [
        context.guarded(
            policy_id, OpeMethod.MODEL_BASED_MLE.value, lambda: _model_based(config, bundle, policy_id, data, **kwargs)
        )
    ]


def importance_sampling_contrast(config: ExperimentConfig, horizon: int, n: int, seed: int) -> list[Row]:
    """Importance sampling against the model-based estimator for pi_1 on the chain instance."""
    context = RowContext(config, horizon, n, seed)
    policy_id = "pi_1"
    try:
        bundle = _theorem3(horizon)
        data = _dataset(context, bundle)
    except Exception as e:
        return _failed_cell(context, [policy_id], e)
    return [
        context.guarded(policy_id, OpeMethod.IMPORTANCE_SAMPLING.value, lambda: _importance_sampling(bundle, policy_id, data)),
        context.guarded(
            policy_id, OpeMethod.MODEL_BASED_MLE.value, lambda: _model_based(config, bundle, policy_id, data, diagnostics=False)
        ),
    ]


EXPERIMENTS: dict[str, RowHandler] = {
    "theorem3-separation": theorem3_separation,
    "theorem6-knife-edge": theorem6_knife_edge,
    "mle-rate": mle_rate,
    "importance-sampling-contrast": importance_sampling_contrast,
}
