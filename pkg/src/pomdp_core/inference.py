import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from src.pomdp_core.enumeration import _observe, enumerate_trajectories, history_layers
from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy
from src.pomdp_core.trajectory import Trajectory, history_violations
from src.utils.errors import ParameterError, StructuralError, UnsupportedPolicyError, ZeroProbabilityHistoryError

BELIEF_TOLERANCE = 1e-10


class TrajectoryProbability(NamedTuple):
    joint: float  # pi(tau) * P_M(tau)
    environment: float  # P_M(tau)
    action: float  # pi(tau)


@dataclass(frozen=True)
class BeliefVector:
    step: int
    values: np.ndarray


@dataclass(frozen=True)
class ForwardPass:
    log_environment: np.ndarray  # log P_M(tau) per row, -inf where zero
    predictive: Optional[np.ndarray]  # b_S(tau_steps) per row, None after the last step
    zero: np.ndarray


def _pairs(tau: Union[Trajectory, Sequence[tuple[int, int]]]) -> tuple[tuple[int, int], ...]:
    if isinstance(tau, Trajectory):
        return tau.history()
    return tuple((int(o), int(a)) for o, a in tau)


def _check_history(model: TabularPomdp, pairs) -> None:
    violations = history_violations(model, pairs)
    if violations:
        raise StructuralError(violations)


def forward_filter(
    model: TabularPomdp,
    observations: np.ndarray,
    actions: np.ndarray,
    steps: Optional[int] = None,
) -> ForwardPass:
    """
    Scaled forward recursion over a batch of histories.

    Every step is normalized, so long horizons do not underflow; the log of the
    normalizers is the log environment probability.
    """
    steps = model.horizon if steps is None else steps
    observations = np.asarray(observations)
    actions = np.asarray(actions)
    n = observations.shape[0]
    alpha = np.tile(model.initial_dist, (n, 1))
    log_prob = np.zeros(n)
    zero = np.zeros(n, dtype=bool)
    for k in range(steps):
        beta = alpha * model.emissions[k][observations[:, k]]
        scale = beta.sum(axis=1)
        dead = scale <= 0
        zero |= dead
        scale = np.where(dead, 1.0, scale)
        log_prob += np.log(scale)
        alpha = beta / scale[:, None]
        if k < model.horizon - 1:
            moved = np.zeros((n, model.state_counts[k + 1]))
            for a in range(model.action_count):
                rows = actions[:, k] == a
                if rows.any():
                    moved[rows] = alpha[rows] @ model.transitions[k][a].T
            alpha = moved
    log_prob[zero] = -np.inf
    predictive = alpha if steps < model.horizon else None
    return ForwardPass(log_prob, predictive, zero)


def trajectory_prob(
    model: TabularPomdp,
    policy: Policy,
    tau: Union[Trajectory, Sequence[tuple[int, int]]],
    up_to: Optional[int] = None,
) -> TrajectoryProbability:
    """
    P^pi_M(tau_h) by direct forward recursion over latent states.

    :param tau: Full trajectory or (o, a) pairs
    :param up_to: Step h to stop at, defaults to the length of tau
    """
    pairs = _pairs(tau)
    up_to = len(pairs) if up_to is None else up_to
    if not 1 <= up_to <= min(len(pairs), model.horizon):
        raise StructuralError(f"up_to={up_to} must lie in [1, {min(len(pairs), model.horizon)}]")
    pairs = pairs[:up_to]
    _check_history(model, pairs)
    policy.check_compatible(model)

    alpha = np.asarray(model.initial_dist)
    action = 1.0
    beta = alpha
    for k, (o, a) in enumerate(pairs):
        beta = alpha * model.emissions[k][o]
        action *= float(policy.action_probs(k + 1, pairs[:k], o)[a])
        if k < up_to - 1:
            alpha = model.transitions[k][a] @ beta
    environment = float(beta.sum())
    return TrajectoryProbability(joint=environment * action, environment=environment, action=action)


def belief_state(model: TabularPomdp, tau: Sequence[tuple[int, int]]) -> BeliefVector:
    """b_S(tau_h): posterior over S_{h+1} given tau_h. o_{h+1} is not conditioned on."""
    pairs = _pairs(tau)
    if len(pairs) > model.horizon - 1:
        raise StructuralError(f"belief over S_(h+1) needs h <= {model.horizon - 1}, got {len(pairs)}")
    _check_history(model, pairs)
    alpha = np.asarray(model.initial_dist, dtype=np.float64)
    for k, (o, a) in enumerate(pairs):
        alpha = model.transitions[k][a] @ (alpha * model.emissions[k][o])
    total = alpha.sum()
    if total <= 0:
        raise ZeroProbabilityHistoryError(f"history {pairs} has probability 0, its belief is undefined")
    return BeliefVector(step=len(pairs), values=alpha / total)


def state_marginals(model: TabularPomdp, policy: Policy, cap: Optional[int] = None) -> list[np.ndarray]:
    """d^pi_h(s) for h = 1..H; exact recursion for memoryless policies, enumeration otherwise."""
    policy.check_compatible(model)
    if not policy.is_memoryless:
        return [
            (layer.alpha * layer.action_prob[:, None]).sum(axis=0)
            for layer in history_layers(model, policy, model.horizon - 1, cap=cap)
        ]
    marginals = [np.asarray(model.initial_dist, dtype=np.float64)]
    for k in range(model.horizon - 1):
        d = marginals[-1]
        table = policy.memoryless_table(k + 1, model.obs_counts[k])
        state_action = d[:, None] * (model.emissions[k].T @ table)
        marginals.append(np.einsum("ats,sa->t", model.transitions[k], state_action))
    return marginals


def latent_occupancy(model: TabularPomdp, policy: Policy, h: int, cap: Optional[int] = None) -> np.ndarray:
    """d^pi_h(s, a) as an (|S_h|, A) matrix."""
    if not 1 <= h <= model.horizon:
        raise ParameterError(f"step must lie in [1, {model.horizon}], got {h}")
    policy.check_compatible(model)
    if policy.is_memoryless:
        d = state_marginals(model, policy)[h - 1]
        return d[:, None] * (model.emissions[h - 1].T @ policy.memoryless_table(h, model.obs_counts[h - 1]))
    *_, layer = history_layers(model, policy, h - 1, cap=cap)
    _, _, beta, probs = _observe(model, layer, policy)
    weight = np.repeat(layer.action_prob, model.obs_counts[h - 1])
    return (beta * weight[:, None]).T @ probs


def latent_value(model: TabularPomdp, policy: Policy, h: int) -> np.ndarray:
    """V^pi_{S,h}(s): expected reward from step h to H given s_h = s, for a memoryless policy."""
    if not policy.is_memoryless:
        raise UnsupportedPolicyError("the latent value function is defined for memoryless policies only")
    if not 1 <= h <= model.horizon:
        raise ParameterError(f"step must lie in [1, {model.horizon}], got {h}")
    policy.check_compatible(model)
    value = model.emissions[-1].T @ model.rewards[-1]
    for k in range(model.horizon - 2, h - 2, -1):
        emission = model.emissions[k]
        table = policy.memoryless_table(k + 1, model.obs_counts[k])
        continuation = np.einsum("ats,t->as", model.transitions[k], value)
        value = emission.T @ model.rewards[k] + np.einsum("os,oa,as->s", emission, table, continuation)
    return value


def policy_value(model: TabularPomdp, policy: Policy, cap: Optional[int] = None) -> float:
    """
    Exact J(pi).

    Memoryless policies use the latent-state recursion; history-dependent ones
    sum probability times return over every enumerated trajectory.
    """
    policy.check_compatible(model)
    if policy.is_memoryless:
        return float(
            sum(d @ (model.emissions[k].T @ model.rewards[k]) for k, d in enumerate(state_marginals(model, policy)))
        )
    table = enumerate_trajectories(model, policy, cap=cap)
    value = float(table.joint_prob @ table.returns(model))
    logging.debug(f"J({policy.policy_id}) on {model.name or '<unnamed>'} = {value} over {table.observations.shape[0]} trajectories")
    return value


def trajectory_tv_distance(first: TabularPomdp, second: TabularPomdp, policy: Policy, cap: Optional[int] = None) -> float:
    """Total-variation distance between the full-trajectory laws P^pi of two models."""
    if not first.shares_observables_with(second):
        raise StructuralError("models disagree on horizon, actions or observation counts")
    p = enumerate_trajectories(first, policy, cap=cap, prune=False).joint_prob
    q = enumerate_trajectories(second, policy, cap=cap, prune=False).joint_prob
    return 0.5 * float(np.abs(p - q).sum())


def marginal_tv_distance(
    first: TabularPomdp,
    second: TabularPomdp,
    policy: Policy,
    h: int,
    cap: Optional[int] = None,
) -> float:
    """TV distance of the (tau_h, o_{h+1}) marginals, 0 <= h <= H - 1."""
    if not first.shares_observables_with(second):
        raise StructuralError("models disagree on horizon, actions or observation counts")
    if not 0 <= h <= first.horizon - 1:
        raise ParameterError(f"h must lie in [0, {first.horizon - 1}], got {h}")

    def marginal(model: TabularPomdp) -> np.ndarray:
        *_, layer = history_layers(model, policy, h, cap=cap, prune=False)
        return (layer.alpha @ model.emissions[h].T) * layer.action_prob[:, None]

    return 0.5 * float(np.abs(marginal(first) - marginal(second)).sum())


def action_probabilities(policy: Policy, observations: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """(n, H) matrix of pi(a_h | tau_{h-1}, o_h) along each recorded trajectory."""
    observations = np.asarray(observations)
    actions = np.asarray(actions)
    n, horizon = observations.shape
    probs = np.zeros((n, horizon))
    rows = np.arange(n)
    for h in range(1, horizon + 1):
        probs[:, h - 1] = policy.batch_probs(h, observations, actions)[rows, actions[:, h - 1]]
    return probs
