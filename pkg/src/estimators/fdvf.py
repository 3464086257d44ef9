from typing import Optional

import numpy as np

from src.coverage.coefficients import behavior_prior
from src.coverage.matrices import outcome_matrix
from src.pomdp_core.inference import latent_value
from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy
from src.utils.errors import DegenerateWeightError, ParameterError, RevealingViolationError, UnsupportedPolicyError
from src.utils.linalg import is_singular, solve


def fdvf_construct(
    model: TabularPomdp,
    behavior: Policy,
    target: Policy,
    h: int,
    cap: Optional[int] = None,
) -> np.ndarray:
    """
    Future-dependent value function V_{F,h} with U_{F,h}^T V_{F,h} = V^{pi_e}_{S,h}.

    V_{F,h} = diag(R+ / Z) U diag(p) Sigma^{-T} V_S, where Z = U p, R+ is the return of each
    future and Sigma = diag(p) U^T diag(R+ / Z) U. Futures no state can produce get 0.

    :raises DegenerateWeightError: a reachable future has zero return
    :raises RevealingViolationError: Sigma is singular
    """
    if not behavior.is_memoryless or not target.is_memoryless:
        raise UnsupportedPolicyError("future-dependent value functions need memoryless behavior and target policies")
    if not 1 <= h <= model.horizon:
        raise ParameterError(f"step must lie in [1, {model.horizon}], got {h}")
    target.check_compatible(model)

    outcome = outcome_matrix(model, behavior, h, cap=cap)
    U = outcome.matrix
    prior = behavior_prior(model, behavior, h, cap=cap)
    returns = outcome.index.future_returns(model)
    occupancy = U @ prior
    reachable = occupancy > 0
    if np.any(returns[reachable] <= 0):
        zero = np.flatnonzero(reachable & (returns <= 0))
        raise DegenerateWeightError(
            f"futures {[outcome.index.future(int(r)) for r in zero[:5]]} at step {h} have zero return, "
            "the reward-weighted occupancy is not invertible"
        )

    weight = np.zeros_like(occupancy)
    weight[reachable] = returns[reachable] / occupancy[reachable]
    sigma = prior[:, None] * (U.T @ (weight[:, None] * U))
    if is_singular(sigma):
        raise RevealingViolationError(h, f"reward-weighted future confusion matrix is singular at step {h}")
    coefficients = solve(sigma.T, latent_value(model, target, h))
    return weight * (U @ (prior * coefficients))
