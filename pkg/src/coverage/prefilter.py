import logging
from typing import Optional, Sequence

import numpy as np

from src.coverage.coefficients import sigma_obs
from src.coverage.matrices import confusion_matrix, inverse_l1_norm, outcome_matrices
from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy
from src.utils.errors import ParameterError, UnsupportedPolicyError
from src.utils.settings_manager import DEFAULT_SINGULAR_CUTOFF
from src.utils.types import RevealingMode


def revealing_coefficients(
    model: TabularPomdp,
    behavior: Policy,
    mode: RevealingMode,
    cap: Optional[int] = None,
    cutoff: float = DEFAULT_SINGULAR_CUTOFF,
) -> dict[int, float]:
    """c_o (single) or c_f (multi) of a model under its own dynamics, for h in [H-1]."""
    mode = RevealingMode(mode)
    if mode == RevealingMode.SINGLE:
        return {h: sigma_obs(model, h, cutoff).coefficient for h in range(1, model.horizon)}
    coefficients = {}
    for outcome in outcome_matrices(model, behavior, down_to=1, cap=cap):
        if outcome.index.step < model.horizon:
            coefficients[outcome.index.step] = inverse_l1_norm(confusion_matrix(outcome.matrix), cutoff)
    return coefficients


def prefilter_indices(
    models: Sequence[TabularPomdp],
    behavior: Policy,
    mode: RevealingMode,
    threshold: float,
    cap: Optional[int] = None,
    cutoff: float = DEFAULT_SINGULAR_CUTOFF,
) -> list[int]:
    """Indices of the models whose per-step revealing coefficient stays within `threshold`."""
    mode = RevealingMode(mode)
    if not threshold > 0:
        raise ParameterError(f"pre-filter threshold must be positive, got {threshold}")
    if mode == RevealingMode.MULTI and not behavior.is_memoryless:
        raise UnsupportedPolicyError(
            f"multi-step pre-filtering needs a memoryless behavior policy, {behavior.policy_id} depends on the history"
        )
    if np.isinf(threshold):
        return list(range(len(models)))

    kept = []
    for index, model in enumerate(models):
        coefficients = revealing_coefficients(model, behavior, mode, cap=cap, cutoff=cutoff)
        worst = max(coefficients.values(), default=0.0)
        if worst <= threshold:
            kept.append(index)
        else:
            logging.debug(f"pre-filter drops model {index} ({model.name or '<unnamed>'}): {mode.value} coefficient {worst}")
    logging.info(f"pre-filter ({mode.value}, threshold {threshold}) keeps {len(kept)} of {len(models)} models")
    return kept


def prefilter(
    models: Sequence[TabularPomdp],
    behavior: Policy,
    mode: RevealingMode,
    threshold: float,
    cap: Optional[int] = None,
    cutoff: float = DEFAULT_SINGULAR_CUTOFF,
) -> list[TabularPomdp]:
    """
    Exclude every model that violates the single-step (c_o) or multi-step (c_f) revealing bound.

    Order is preserved. An infinite threshold keeps every model.
    """
    return [models[i] for i in prefilter_indices(models, behavior, mode, threshold, cap=cap, cutoff=cutoff)]
