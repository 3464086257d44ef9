import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.coverage.matrices import confusion_matrix, inverse_l1_norm, outcome_matrix
from src.pomdp_core.enumeration import _observe, history_layers
from src.pomdp_core.inference import forward_filter, latent_occupancy, state_marginals
from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy
from src.pomdp_core.simulate import sample_trajectories
from src.utils.errors import DegeneratePriorError, ParameterError
from src.utils.linalg import is_singular, min_eigenvalue
from src.utils.settings_manager import DEFAULT_SINGULAR_CUTOFF
from src.utils.types import ComputationMethod


@dataclass(frozen=True)
class SigmaResult:
    """A per-step revealing or coverage matrix with its scalar coefficient."""

    step: int
    matrix: np.ndarray
    coefficient: float
    method: ComputationMethod = ComputationMethod.EXACT


def _check_step(model: TabularPomdp, h: int) -> None:
    if not 1 <= h <= model.horizon:
        raise ParameterError(f"step must lie in [1, {model.horizon}], got {h}")


def compute_c_a(model: TabularPomdp, behavior: Policy, cap: Optional[int] = None) -> float:
    """
    C_A = max 1 / pi_b(a | tau_{h-1}, o_h) over reachable (tau_{h-1}, o_h) and every action.

    Infinite as soon as a reachable observation leaves some action with probability 0.
    """
    behavior.check_compatible(model)
    worst = 0.0
    if behavior.is_memoryless:
        for k, d in enumerate(state_marginals(model, behavior)):
            reachable = model.emissions[k] @ d > 0
            table = behavior.memoryless_table(k + 1, model.obs_counts[k])
            smallest = table[reachable].min(axis=1)
            if smallest.size and smallest.min() <= 0:
                return float("inf")
            if smallest.size:
                worst = max(worst, float(1.0 / smallest.min()))
        return worst
    for layer in history_layers(model, behavior, model.horizon - 1, cap=cap):
        _, _, beta, probs = _observe(model, layer, behavior)
        weight = np.repeat(layer.action_prob, model.obs_counts[layer.depth])
        reachable = beta.sum(axis=1) * weight > 0
        smallest = probs[reachable].min(axis=1)
        if smallest.size and smallest.min() <= 0:
            return float("inf")
        if smallest.size:
            worst = max(worst, float(1.0 / smallest.min()))
    return worst


def _belief_second_moment(layer) -> np.ndarray:
    beliefs = layer.beliefs
    return (beliefs * layer.joint_prob[:, None]).T @ beliefs


def _history_coefficient(sigma: np.ndarray, cutoff: float) -> float:
    return float("inf") if is_singular(sigma, cutoff) else 1.0 / min_eigenvalue(sigma)


def sigma_history(
    model: TabularPomdp,
    behavior: Policy,
    h: int,
    mc_samples: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    cap: Optional[int] = None,
    cutoff: float = DEFAULT_SINGULAR_CUTOFF,
) -> SigmaResult:
    """
    Sigma_{H,h} = E_{pi_b}[b_S(tau_{h-1}) b_S(tau_{h-1})^T] and c_h = 1 / sigma_min.

    Exact by enumerating tau_{h-1}; with `mc_samples` it averages over sampled histories.
    """
    _check_step(model, h)
    behavior.check_compatible(model)
    if mc_samples:
        if rng is None:
            raise ParameterError("Monte Carlo mode needs an explicit generator")
        observations, actions, _ = sample_trajectories(model, behavior, mc_samples, rng)
        beliefs = forward_filter(model, observations, actions, steps=h - 1).predictive
        sigma = beliefs.T @ beliefs / mc_samples
        method = ComputationMethod.MONTE_CARLO
    else:
        *_, layer = history_layers(model, behavior, h - 1, cap=cap)
        sigma = _belief_second_moment(layer)
        method = ComputationMethod.EXACT
    coefficient = _history_coefficient(sigma, cutoff)
    logging.debug(f"Sigma_H at step {h} ({method.value}): c_h = {coefficient}")
    return SigmaResult(h, sigma, coefficient, method)


def sigma_obs(model: TabularPomdp, h: int, cutoff: float = DEFAULT_SINGULAR_CUTOFF) -> SigmaResult:
    """Sigma_{O,h} = O_h^T W_h^{-1} O_h and c_o = ||Sigma_{O,h}^{-1}||_1."""
    _check_step(model, h)
    sigma = confusion_matrix(model.emissions[h - 1])
    return SigmaResult(h, sigma, inverse_l1_norm(sigma, cutoff))


def behavior_prior(model: TabularPomdp, behavior: Policy, h: int, cap: Optional[int] = None) -> np.ndarray:
    """p_h = d^{pi_b}_h(s), refused when some state is never visited."""
    prior = state_marginals(model, behavior, cap=cap)[h - 1]
    if np.any(prior <= 0):
        raise DegeneratePriorError(
            f"behavior occupancy at step {h} is zero on states {np.flatnonzero(prior <= 0).tolist()}"
        )
    return prior


def sigma_obs_weighted(
    model: TabularPomdp,
    behavior: Policy,
    h: int,
    cap: Optional[int] = None,
    cutoff: float = DEFAULT_SINGULAR_CUTOFF,
) -> SigmaResult:
    """diag(p_h) O_h^T diag(O_h p_h)^{-1} O_h with p_h the behavior state occupancy."""
    _check_step(model, h)
    sigma = confusion_matrix(model.emissions[h - 1], behavior_prior(model, behavior, h, cap=cap))
    return SigmaResult(h, sigma, inverse_l1_norm(sigma, cutoff))


def sigma_future(
    model: TabularPomdp,
    behavior: Policy,
    h: int,
    cap: Optional[int] = None,
    cutoff: float = DEFAULT_SINGULAR_CUTOFF,
) -> SigmaResult:
    """Sigma_{F,h} = U_{F,h}^T Z_h^{-1} U_{F,h} and c_f = ||Sigma_{F,h}^{-1}||_1."""
    _check_step(model, h)
    sigma = confusion_matrix(outcome_matrix(model, behavior, h, cap=cap).matrix)
    return SigmaResult(h, sigma, inverse_l1_norm(sigma, cutoff))


def sigma_future_weighted(
    model: TabularPomdp,
    behavior: Policy,
    h: int,
    cap: Optional[int] = None,
    cutoff: float = DEFAULT_SINGULAR_CUTOFF,
) -> SigmaResult:
    """Sigma^{p_h}_{F,h} = diag(p_h) U^T (Z^{p_h}_h)^{-1} U; entry (i, j) = Pr(s'_h = i | s_h = j)."""
    _check_step(model, h)
    outcome = outcome_matrix(model, behavior, h, cap=cap).matrix
    sigma = confusion_matrix(outcome, behavior_prior(model, behavior, h, cap=cap))
    return SigmaResult(h, sigma, inverse_l1_norm(sigma, cutoff))


def occupancy_ratio_bound(model: TabularPomdp, target: Policy, behavior: Policy, cap: Optional[int] = None) -> float:
    """
    max over h in [H-1] and (s, a) of d^{pi_e}_h(s, a) / d^{pi_b}_h(s, a).

    Pairs neither policy visits are ignored; a pair only the target visits makes the bound infinite.
    """
    bound = 0.0
    for h in range(1, model.horizon):
        target_occupancy = latent_occupancy(model, target, h, cap=cap)
        behavior_occupancy = latent_occupancy(model, behavior, h, cap=cap)
        visited = target_occupancy > 0
        if np.any(visited & (behavior_occupancy <= 0)):
            return float("inf")
        if visited.any():
            bound = max(bound, float((target_occupancy[visited] / behavior_occupancy[visited]).max()))
    return bound


def history_sigmas(
    model: TabularPomdp,
    behavior: Policy,
    cap: Optional[int] = None,
    cutoff: float = DEFAULT_SINGULAR_CUTOFF,
) -> list[SigmaResult]:
    """Exact Sigma_{H,h} for every h in [H-1] from a single enumeration sweep."""
    behavior.check_compatible(model)
    results = []
    for layer in history_layers(model, behavior, max(model.horizon - 2, 0), cap=cap):
        if layer.depth + 1 > model.horizon - 1:
            break
        sigma = _belief_second_moment(layer)
        results.append(SigmaResult(layer.depth + 1, sigma, _history_coefficient(sigma, cutoff)))
    return results
