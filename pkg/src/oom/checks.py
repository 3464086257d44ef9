"""
Numerical checks of the operator identities.

- reconstruction: the operator product reproduces P_M(tau) for every trajectory
- belief relation: b(tau_h) = P_M(tau_h) U_{h+1} b_S(tau_h)
- contraction: sum over continuations of ||B_{h:j+1} x||_1 pi(.|tau_j) <= c ||x||_1
"""

import logging
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from src.oom.build import build_oom
from src.oom.model import OomModel
from src.pomdp_core.enumeration import check_capacity, enumerate_trajectories, history_layers
from src.pomdp_core.inference import forward_filter
from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy
from src.pomdp_core.trajectory import Trajectory
from src.utils.errors import ParameterError, StructuralError, ZeroProbabilityHistoryError
from src.utils.settings_manager import DEFAULT_SINGULAR_CUTOFF, DEFAULT_SPOT_CHECK_TRAJECTORIES
from src.utils.types import PseudoInverseWeighting, RevealingMode

IDENTITY_TOLERANCE = 1e-8


def _pairs(tau: Union[Trajectory, Sequence[tuple[int, int]]]) -> tuple[tuple[int, int], ...]:
    if isinstance(tau, Trajectory):
        return tau.history()
    return tuple((int(o), int(a)) for o, a in tau)


def _arrays(pairs: Sequence[tuple[int, int]]) -> tuple[np.ndarray, np.ndarray]:
    observations = np.array([[o for o, _ in pairs]], dtype=np.int64).reshape(1, len(pairs))
    actions = np.array([[a for _, a in pairs]], dtype=np.int64).reshape(1, len(pairs))
    return observations, actions


def oom_trajectory_prob(oom: OomModel, policy: Policy, tau: Union[Trajectory, Sequence[tuple[int, int]]]) -> float:
    """P^pi(tau_h) = pi(tau_h) * e_{o_h}^T B_{h-1} ... B_1 b0."""
    pairs = _pairs(tau)
    if not 1 <= len(pairs) <= oom.horizon:
        raise StructuralError(f"trajectory has {len(pairs)} steps, horizon is {oom.horizon}")
    for h, (o, a) in enumerate(pairs, start=1):
        if not 0 <= o < oom.obs_counts[h - 1] or not 0 <= a < oom.action_count:
            raise StructuralError(f"(o={o}, a={a}) at step {h} out of range")
    action = 1.0
    for h, (o, a) in enumerate(pairs, start=1):
        action *= float(policy.action_probs(h, pairs[: h - 1], o)[a])
    observations, actions = _arrays(pairs)
    return action * float(oom.environment_probs(observations, actions, steps=len(pairs))[0])


def oom_vector(oom: OomModel, history: Sequence[tuple[int, int]]) -> np.ndarray:
    """b(tau_h) = B_h(o_h, a_h) ... B_1(o_1, a_1) b0."""
    pairs = _pairs(history)
    vector = np.asarray(oom.b0)[None, :]
    for h, (o, a) in enumerate(pairs, start=1):
        vector = oom.apply(h, vector, np.array([o]), np.array([a]))
    return vector[0]


def belief_relation_residual(model: TabularPomdp, oom: OomModel, history: Sequence[tuple[int, int]]) -> float:
    """
    ||b(tau_h) - P_M(tau_h) U_{h+1} b_S(tau_h)||_1 for 0 <= h <= H - 1.

    The right-hand side comes from the latent forward recursion, not from the operators.
    """
    pairs = _pairs(history)
    if len(pairs) > model.horizon - 1:
        raise StructuralError(f"belief relation needs h <= {model.horizon - 1}, got {len(pairs)}")
    observations, actions = _arrays(pairs)
    forward = forward_filter(model, observations, actions, steps=len(pairs))
    if forward.zero[0]:
        raise ZeroProbabilityHistoryError(f"history {pairs} has probability 0, its belief is undefined")
    expected = np.exp(forward.log_environment[0]) * (oom.outcome_matrices[len(pairs)] @ forward.predictive[0])
    return float(np.abs(oom_vector(oom, pairs) - expected).sum())


def oom_layers(oom: OomModel, depth: Optional[int] = None, cap: Optional[int] = None) -> Iterator[np.ndarray]:
    """
    Yield b(tau_k) for every history tau_k, k = 0..depth, without pruning.

    Rows follow the (row, o, a) order of the unpruned history enumeration.
    """
    depth = oom.horizon - 1 if depth is None else depth
    vectors = np.asarray(oom.b0)[None, :]
    yield vectors
    rows = 1
    for h in range(1, depth + 1):
        rows *= oom.obs_counts[h - 1] * oom.action_count
        check_capacity(rows * oom.dimension(h + 1), cap, what=f"operator vectors at depth {h}")
        vectors = oom.branch(h, vectors)
        yield vectors


def operator_contraction_check(
    oom: OomModel,
    x: np.ndarray,
    j: int,
    h: int,
    policy: Policy,
    prefix: Optional[Sequence[tuple[int, int]]] = None,
    cap: Optional[int] = None,
) -> float:
    """
    sum over tau_{h:j+1} of ||B_h ... B_{j+1} x||_1 * pi(tau_{h:j+1} | tau_j).

    :param x: Vector over the rows of U_{j+1}
    :param prefix: tau_j conditioned on by history-dependent policies; defaults to all-zero indices
    :return: The left-hand sum, to be compared with c_{j+1} ||x||_1
    """
    if not 0 <= j < h <= oom.horizon - 1:
        raise ParameterError(f"need 0 <= j < h <= {oom.horizon - 1}, got j={j}, h={h}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (oom.dimension(j + 1),):
        raise ParameterError(f"x has shape {x.shape}, expected ({oom.dimension(j + 1)},)")
    prefix = tuple((0, 0) for _ in range(j)) if prefix is None else _pairs(prefix)
    if len(prefix) != j:
        raise ParameterError(f"prefix has {len(prefix)} steps, expected {j}")

    observations, actions = _arrays(prefix)
    vectors = x[None, :]
    weights = np.ones(1)
    A = oom.action_count
    for t in range(j + 1, h + 1):
        n_obs = oom.obs_counts[t - 1]
        check_capacity(vectors.shape[0] * n_obs * A * oom.dimension(t + 1), cap, what="contraction enumeration")
        n = vectors.shape[0]
        branched_observations = np.concatenate(
            [np.repeat(observations, n_obs, axis=0), np.tile(np.arange(n_obs), n)[:, None]], axis=1
        )
        action_history = np.repeat(actions, n_obs, axis=0)
        probs = policy.batch_probs(t, branched_observations, action_history)
        weights = (np.repeat(weights, n_obs)[:, None] * probs).reshape(-1)
        vectors = oom.branch(t, vectors)
        observations = np.repeat(branched_observations, A, axis=0)
        actions = np.concatenate([np.repeat(action_history, A, axis=0), np.tile(np.arange(A), n * n_obs)[:, None]], axis=1)
        keep = weights > 0
        vectors, weights, observations, actions = vectors[keep], weights[keep], observations[keep], actions[keep]
    return float(weights @ np.abs(vectors).sum(axis=1))


@dataclass
class OomCheckReport:
    mode: RevealingMode
    reconstruction_residual: float
    belief_residual: float
    contraction_excess: float  # max over sampled x of (sum - c ||x||_1)
    trajectories: int
    histories: int
    contraction_vectors: int
    tolerance: float = IDENTITY_TOLERANCE
    coefficients: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (
            self.reconstruction_residual <= self.tolerance
            and self.belief_residual <= self.tolerance
            and self.contraction_excess <= self.tolerance
        )

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "passed": self.passed,
            "reconstructionResidual": self.reconstruction_residual,
            "beliefResidual": self.belief_residual,
            "contractionExcess": self.contraction_excess,
            "trajectories": self.trajectories,
            "histories": self.histories,
            "contractionVectors": self.contraction_vectors,
            "coefficients": ["inf" if np.isinf(c) else c for c in self.coefficients],
            "tolerance": self.tolerance,
        }


def reconstruction_residual(model: TabularPomdp, oom: OomModel, cap: Optional[int] = None) -> tuple[float, int]:
    """Max |P_OOM(tau) - P_M(tau)| over every full trajectory, and the number compared."""
    expected = enumerate_trajectories(model, None, cap=cap, prune=False).environment_prob
    *_, last = oom_layers(oom, cap=cap)
    actual = np.repeat(oom.observation_marginal(oom.horizon, last).reshape(-1), model.action_count)
    return float(np.abs(actual - expected).max()), expected.shape[0]


def belief_residuals(model: TabularPomdp, oom: OomModel, cap: Optional[int] = None) -> tuple[float, int]:
    """Max belief-relation residual over every positive-probability history tau_0 .. tau_{H-1}."""
    worst, count = 0.0, 0
    layers = history_layers(model, None, model.horizon - 1, cap=cap, prune=False)
    for layer, vectors in zip(layers, oom_layers(oom, cap=cap)):
        positive = layer.environment_prob > 0
        expected = layer.alpha[positive] @ oom.outcome_matrices[layer.depth].T
        residual = np.abs(vectors[positive] - expected).sum(axis=1)
        if residual.size:
            worst = max(worst, float(residual.max()))
        count += int(positive.sum())
    return worst, count


def oom_check(
    model: TabularPomdp,
    mode: RevealingMode = RevealingMode.SINGLE,
    behavior: Optional[Policy] = None,
    weighting: PseudoInverseWeighting = PseudoInverseWeighting.UNIFORM,
    contraction_vectors: int = 20,
    rng: Optional[np.random.Generator] = None,
    cap: Optional[int] = None,
    spot_check: int = DEFAULT_SPOT_CHECK_TRAJECTORIES,
    cutoff: float = DEFAULT_SINGULAR_CUTOFF,
) -> OomCheckReport:
    """
    Build the operators and run the reconstruction, belief-relation and contraction suites.

    Contraction vectors are standard normal, each paired with a random (j, h) and checked
    under the behavior policy (uniform when none is given).
    """
    oom = build_oom(model, mode, behavior, weighting, cap=cap, spot_check=spot_check, cutoff=cutoff)
    rng = np.random.default_rng(0) if rng is None else rng
    reconstruction, trajectories = reconstruction_residual(model, oom, cap=cap)
    belief, histories = belief_residuals(model, oom, cap=cap)

    policy = behavior if behavior is not None else Policy.uniform(model)
    excess = -np.inf
    checked = 0
    if model.horizon >= 2:
        for _ in range(contraction_vectors):
            j = int(rng.integers(0, model.horizon - 1))
            h = int(rng.integers(j + 1, model.horizon))
            x = rng.standard_normal(oom.dimension(j + 1))
            total = operator_contraction_check(oom, x, j, h, policy, cap=cap)
            excess = max(excess, total - oom.coefficients[j] * float(np.abs(x).sum()))
            checked += 1
    excess = float(excess) if checked else 0.0

    report = OomCheckReport(
        mode=RevealingMode(mode),
        reconstruction_residual=reconstruction,
        belief_residual=belief,
        contraction_excess=excess,
        trajectories=trajectories,
        histories=histories,
        contraction_vectors=checked,
        coefficients=list(oom.coefficients),
    )
    logging.info(
        f"oom-check {report.mode.value}: reconstruction {reconstruction:.2e}, belief {belief:.2e}, "
        f"contraction excess {excess:.2e} -> {'pass' if report.passed else 'FAIL'}"
    )
    return report
