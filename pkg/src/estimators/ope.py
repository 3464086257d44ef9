import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.coverage.prefilter import prefilter_indices
from src.estimators.effective_coverage import c_eff_multi, c_eff_single
from src.estimators.likelihood import class_log_likelihoods, eps_approx, mle_select
from src.estimators.model_class import ModelClass, OpeResult
from src.pomdp_core.inference import action_probabilities, policy_value, trajectory_tv_distance
from src.pomdp_core.policy import Policy
from src.pomdp_core.trajectory import Dataset
from src.utils.errors import EmptyModelClassError, ParameterError, PomdpOpeError, ZeroBehaviorProbabilityError
from src.utils.settings_manager import DEFAULT_SINGULAR_CUTOFF
from src.utils.types import OpeMethod, RevealingMode


def _describe(error: Exception) -> str:
    return f"{type(error).__name__}: {error}"


def model_based_ope(
    models: ModelClass,
    behavior: Policy,
    target: Policy,
    data: Dataset,
    mode: RevealingMode = RevealingMode.SINGLE,
    threshold: Optional[float] = None,
    floor: Optional[float] = None,
    diagnostics: bool = True,
    cap: Optional[int] = None,
    cutoff: float = DEFAULT_SINGULAR_CUTOFF,
) -> OpeResult:
    """
    Pre-filter, maximize the likelihood, then roll out the target policy in the selected model.

    :param threshold: Revealing-coefficient bound for the pre-filter; None skips pre-filtering
    :param floor: Likelihood floor; None scores a member that rules out a trajectory at -inf
    :param cutoff: Relative singular-value cutoff used by the pre-filter
    :param diagnostics: When M* is marked in the class, also report |J - J^|, the trajectory TV
        distance under pi_b and the effective coverage of the selected model
    :raises EmptyModelClassError: the pre-filter removed every model
    """
    mode = RevealingMode(mode)
    if threshold is None:
        kept = list(range(len(models)))
    else:
        kept = prefilter_indices(models.models, behavior, mode, threshold, cap=cap, cutoff=cutoff)
    if not kept:
        raise EmptyModelClassError(
            f"every model violates the {mode.value}-step revealing bound {threshold}, the class is empty"
        )
    survivors = models.subset(kept)
    selected = kept[mle_select(survivors, behavior, data, floor)]
    chosen = models[selected]
    estimate = policy_value(chosen, target, cap=cap)
    logging.info(f"model-based OPE selects model {selected} ({chosen.name or '<unnamed>'}), J^ = {estimate:.6f}")

    report = {"n": data.n, "prefilterKept": kept, "selectedModelName": chosen.name}
    if diagnostics and models.true_model is not None:
        truth = models.true_model
        true_value = policy_value(truth, target, cap=cap)
        report["trueValue"] = true_value
        report["absError"] = abs(true_value - estimate)
        report.update(_diagnose(models, selected, behavior, target, data, mode, floor, cap))
    return OpeResult(estimate=estimate, method=OpeMethod.MODEL_BASED_MLE, selected_model_index=selected, diagnostics=report)


def _diagnose(models: ModelClass, selected: int, behavior: Policy, target: Policy, data: Dataset, mode, floor, cap) -> dict:
    truth, chosen = models.true_model, models[selected]
    report = {}
    try:
        report["tvDistance"] = trajectory_tv_distance(truth, chosen, behavior, cap=cap)
    except PomdpOpeError as e:
        report["tvDistance"] = _describe(e)
    try:
        report["epsApprox"] = eps_approx(models.models, truth, behavior, data, floor)
    except PomdpOpeError as e:
        report["epsApprox"] = _describe(e)
    coverage = c_eff_single if mode == RevealingMode.SINGLE else c_eff_multi
    try:
        report["cEff"] = coverage(truth, chosen, target, behavior, cap=cap).to_dict()
    except PomdpOpeError as e:
        report["cEff"] = _describe(e)
    return report


def importance_sampling_ope(data: Dataset, target: Policy, behavior: Policy) -> OpeResult:
    """
    Trajectory-wise importance sampling: mean of prod_h pi_e/pi_b times the return.

    The raw mean is unbiased but a single heavy weight can push it above H; the reported
    estimate is clipped to [0, H] and the raw mean kept as `unclippedEstimate`.

    :raises ZeroBehaviorProbabilityError: pi_b gives a recorded action probability 0
    """
    if data.n == 0:
        raise ParameterError("importance sampling needs at least one trajectory")
    behavior_probs = action_probabilities(behavior, data.observations, data.actions)
    dead = np.argwhere(behavior_probs <= 0)
    if dead.size:
        i, k = dead[0]
        raise ZeroBehaviorProbabilityError(
            f"behavior policy gives action {data.actions[i, k]} at step {k + 1} of trajectory {i} probability 0"
        )
    weights = np.prod(action_probabilities(target, data.observations, data.actions) / behavior_probs, axis=1)
    terms = weights * data.returns
    unclipped = float(terms.mean())
    estimate = float(np.clip(unclipped, 0.0, data.horizon))
    standard_error = float(terms.std(ddof=1) / np.sqrt(data.n)) if data.n > 1 else float("inf")
    effective = float(weights.sum() ** 2 / (weights**2).sum()) if weights.any() else 0.0
    return OpeResult(
        estimate=estimate,
        method=OpeMethod.IMPORTANCE_SAMPLING,
        diagnostics={
            "n": data.n,
            "unclippedEstimate": unclipped,
            "clipped": estimate != unclipped,
            "standardError": standard_error,
            "maxWeight": float(weights.max()),
            "effectiveSampleSize": effective,
        },
    )


@dataclass(frozen=True, eq=False)
class Transcript:
    """
    pi_e(. | tau^(i)_{h-1}, o^(i)_h) for every trajectory i and step h: shape (n, H, A).

    This is everything a model-free estimator restricted to the dataset may learn about pi_e.
    """

    distributions: np.ndarray
    policy_id: str = ""

    def __eq__(self, other) -> bool:
        if not isinstance(other, Transcript):
            return NotImplemented
        return self.distributions.shape == other.distributions.shape and bool(
            np.array_equal(self.distributions, other.distributions)
        )

    def __hash__(self):
        return hash((self.distributions.shape, self.distributions.tobytes()))

    def __len__(self) -> int:
        return self.distributions.shape[0] * self.distributions.shape[1]

    def differing_trajectories(self, other: "Transcript") -> np.ndarray:
        """Indices of trajectories on which the two policies answered differently."""
        return np.flatnonzero(np.any(self.distributions != other.distributions, axis=(1, 2)))


def restricted_policy_oracle(target: Policy, data: Dataset) -> Transcript:
    """Query pi_e only on the histories that appear in the dataset."""
    n, horizon = data.observations.shape
    distributions = np.zeros((n, horizon, target.action_count))
    if n:
        for h in range(1, horizon + 1):
            distributions[:, h - 1] = target.batch_probs(h, data.observations, data.actions)
    distributions.setflags(write=False)
    return Transcript(distributions, policy_id=target.policy_id)


def true_value_result(models: ModelClass, target: Policy, cap: Optional[int] = None) -> OpeResult:
    """Reference row: J_{M*}(pi_e) by exact computation."""
    if models.true_model is None:
        raise ParameterError("the class does not mark a true model")
    return OpeResult(
        estimate=policy_value(models.true_model, target, cap=cap),
        method=OpeMethod.TRUE_VALUE,
        selected_model_index=models.true_index,
    )


def log_likelihood_table(models: ModelClass, behavior: Policy, data: Dataset, floor: Optional[float] = None) -> list:
    """Per-member total log-likelihoods, -inf rendered as the string "-inf"."""
    return ["-inf" if np.isneginf(s) else float(s) for s in class_log_likelihoods(models, behavior, data, floor)]
