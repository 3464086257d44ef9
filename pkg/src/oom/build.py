import logging
from typing import Optional

import numpy as np

from src.coverage.coefficients import behavior_prior
from src.coverage.matrices import (
    FutureIndex,
    confusion_matrix,
    inverse_l1_norm,
    outcome_matrices,
    weighted_pseudo_inverse,
)
from src.pomdp_core.inference import forward_filter
from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy
from src.pomdp_core.simulate import sample_trajectories
from src.oom.model import OomModel
from src.utils.errors import OomConstructionError, ParameterError, RevealingViolationError, UnsupportedPolicyError
from src.utils.linalg import is_singular
from src.utils.rng import make_rng
from src.utils.settings_manager import DEFAULT_SINGULAR_CUTOFF, DEFAULT_SPOT_CHECK_TRAJECTORIES
from src.utils.types import PseudoInverseWeighting, RevealingMode

SPOT_CHECK_TOLERANCE = 1e-6


def _outcomes(model: TabularPomdp, mode: RevealingMode, behavior: Optional[Policy], cap: Optional[int]):
    if mode == RevealingMode.SINGLE:
        return [np.asarray(o) for o in model.emissions], [FutureIndex(h, (count,)) for h, count in enumerate(model.obs_counts, start=1)]
    matrices = list(outcome_matrices(model, behavior, down_to=1, cap=cap))[::-1]
    return [m.matrix for m in matrices], [m.index for m in matrices]


def spot_check_residual(
    model: TabularPomdp,
    oom: OomModel,
    trajectories: int = DEFAULT_SPOT_CHECK_TRAJECTORIES,
    seed: int = 0,
) -> float:
    """Largest |P_OOM(tau) - P_M(tau)| over trajectories drawn from the model under a uniform policy."""
    if trajectories <= 0:
        return 0.0
    observations, actions, _ = sample_trajectories(model, Policy.uniform(model), trajectories, make_rng(seed))
    expected = np.exp(forward_filter(model, observations, actions).log_environment)
    return float(np.abs(oom.environment_probs(observations, actions) - expected).max())


def build_oom(
    model: TabularPomdp,
    mode: RevealingMode = RevealingMode.SINGLE,
    behavior: Optional[Policy] = None,
    weighting: PseudoInverseWeighting = PseudoInverseWeighting.UNIFORM,
    cap: Optional[int] = None,
    spot_check: int = DEFAULT_SPOT_CHECK_TRAJECTORIES,
    cutoff: float = DEFAULT_SINGULAR_CUTOFF,
) -> OomModel:
    """
    Build the single-step (emission) or multi-step (outcome matrix) operator model.

    :param behavior: Memoryless policy defining U_{F,h} in multi mode; also the occupancy prior when weighting
    :param spot_check: Number of sampled trajectories on which the reconstruction identity is verified
    :raises RevealingViolationError: Sigma_h is singular at some h in [H-1]
    :raises OomConstructionError: the spot-check residual exceeds 1e-6
    """
    mode = RevealingMode(mode)
    weighting = PseudoInverseWeighting(weighting)
    if mode == RevealingMode.MULTI:
        if behavior is None:
            raise ParameterError("multi-step operators need a behavior policy")
        if not behavior.is_memoryless:
            raise UnsupportedPolicyError(
                f"multi-step operators need a memoryless behavior policy, {behavior.policy_id} depends on the history"
            )
    if weighting == PseudoInverseWeighting.OCCUPANCY and behavior is None:
        raise ParameterError("occupancy weighting needs a behavior policy")
    if behavior is not None:
        behavior.check_compatible(model)

    matrices, indices = _outcomes(model, mode, behavior, cap)
    cores, pseudo_inverses, coefficients = [], [], []
    for h in range(1, model.horizon):
        outcome = matrices[h - 1]
        prior = behavior_prior(model, behavior, h, cap=cap) if weighting == PseudoInverseWeighting.OCCUPANCY else None
        sigma = confusion_matrix(outcome, prior)
        if is_singular(sigma, cutoff):
            raise RevealingViolationError(h, f"{mode.value}-step revealing matrix is singular at step {h}")
        pseudo_inverses.append(weighted_pseudo_inverse(outcome, sigma, prior))
        coefficients.append(inverse_l1_norm(sigma, cutoff))
        emission = model.emissions[h - 1]
        cores.append(np.einsum("ats,os->oats", model.transitions[h - 1], emission))

    oom = OomModel(
        mode=mode,
        weighting=weighting,
        b0=matrices[0] @ model.initial_dist,
        outcome_matrices=tuple(matrices),
        cores=tuple(cores),
        pseudo_inverses=tuple(pseudo_inverses),
        coefficients=tuple(coefficients),
        future_indices=tuple(indices),
        action_count=model.action_count,
        behavior_policy_id=behavior.policy_id if behavior is not None else "",
        name=model.name,
    )

    residual = spot_check_residual(model, oom, spot_check)
    if residual > SPOT_CHECK_TOLERANCE:
        raise OomConstructionError(residual)
    logging.info(
        f"Built {mode.value}-step OOM of {model.name or '<unnamed>'} "
        f"(dims {[oom.dimension(h) for h in range(1, model.horizon + 1)]}, spot-check residual {residual:.2e})"
    )
    return oom
