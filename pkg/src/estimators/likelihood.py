import logging
from typing import Optional, Sequence, Union

import numpy as np

from src.estimators.model_class import ModelClass
from src.pomdp_core.inference import action_probabilities, forward_filter
from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy
from src.pomdp_core.trajectory import Dataset
from src.utils.errors import EmptyModelClassError, StructuralError, ZeroLikelihoodError

Models = Union[ModelClass, Sequence[TabularPomdp]]


def trajectory_log_likelihoods(
    model: TabularPomdp,
    behavior: Policy,
    data: Dataset,
    floor: Optional[float] = None,
) -> np.ndarray:
    """
    log P^{pi_b}_M(tau^(i)) for every trajectory, behavior factor included.

    :param floor: When given, each probability is floored at this value before the log
    :raises ZeroLikelihoodError: a trajectory has probability 0 and no floor is set
    """
    if data.horizon != model.horizon:
        raise StructuralError(f"dataset horizon {data.horizon} differs from model horizon {model.horizon}")
    behavior.check_compatible(model)
    with np.errstate(divide="ignore"):
        environment = forward_filter(model, data.observations, data.actions).log_environment
        action = np.log(action_probabilities(behavior, data.observations, data.actions)).sum(axis=1)
    total = environment + action
    if floor is not None:
        floored = total < np.log(floor)
        if floored.any():
            logging.warning(f"likelihood floor engaged on {int(floored.sum())} trajectories under {model.name or '<unnamed>'}")
        return np.maximum(total, np.log(floor))
    dead = np.flatnonzero(~np.isfinite(total))
    if dead.size:
        raise ZeroLikelihoodError(int(dead[0]), model.name)
    return total


def log_likelihood(model: TabularPomdp, behavior: Policy, data: Dataset, floor: Optional[float] = None) -> float:
    """sum_i log P^{pi_b}_M(tau^(i))."""
    return float(trajectory_log_likelihoods(model, behavior, data, floor).sum())


def class_log_likelihoods(models: Models, behavior: Policy, data: Dataset, floor: Optional[float] = None) -> np.ndarray:
    """
    Total log-likelihood per member.

    Without a floor, a member that gives some trajectory probability 0 scores -inf
    instead of aborting the comparison.
    """
    scores = np.empty(len(models))
    for i, model in enumerate(models):
        try:
            scores[i] = log_likelihood(model, behavior, data, floor)
        except ZeroLikelihoodError as e:
            logging.debug(f"model {i} excluded from the maximization: {e}")
            scores[i] = -np.inf
    return scores


def mle_select(models: Models, behavior: Policy, data: Dataset, floor: Optional[float] = None) -> int:
    """
    argmax_M sum_i log P^{pi_b}_M(tau^(i)); ties go to the lowest index.

    :raises EmptyModelClassError: nothing left to select from
    :raises ZeroLikelihoodError: every member assigns probability 0 to the data
    """
    if len(models) == 0:
        raise EmptyModelClassError("model class is empty, nothing to select")
    scores = class_log_likelihoods(models, behavior, data, floor)
    if not np.isfinite(scores).any():
        raise ZeroLikelihoodError(0, "every model in the class")
    selected = int(np.argmax(scores))
    logging.debug(f"MLE selects model {selected} with log-likelihood {scores[selected]:.6f}")
    return selected


def eps_approx(
    models: Models,
    true_model: TabularPomdp,
    behavior: Policy,
    data: Dataset,
    floor: Optional[float] = None,
) -> float:
    """min_M (1/n) sum_i [log P^{pi_b}_{M*}(tau^(i)) - log P^{pi_b}_M(tau^(i))]."""
    if len(models) == 0:
        raise EmptyModelClassError("model class is empty")
    if data.n == 0:
        return 0.0
    reference = trajectory_log_likelihoods(true_model, behavior, data, floor)
    gaps = [
        0.0 if model is true_model else float(np.mean(reference - trajectory_log_likelihoods(model, behavior, data, floor)))
        for model in models
    ]
    return min(gaps)
