"""
Effective coverage of a learned model against the true one.

For step h the error operators are D_h(o, a) = (B^_h(o, a) - B_h(o, a)) U_h, with B^ built
from the learned model and U_h, b_S(tau_{h-1}) taken from the true model. The coefficient
is the worst ratio over h in [H-1] of

    sum_{o,a} E_{pi_e}[pi_e(a | tau_{h-1}, o) ||D_h(o, a) b_S(tau_{h-1})||_1]
    -------------------------------------------------------------------------
    sum_{o,a} E_{pi_b}[pi_b(a | tau_{h-1}, o) ||D_h(o, a) b_S(tau_{h-1})||_1]
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.coverage.matrices import outcome_matrices
from src.oom.build import build_oom
from src.pomdp_core.enumeration import _observe, history_layers
from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy
from src.utils.errors import CoefficientInvariantError, StructuralError, UnsupportedPolicyError
from src.utils.types import RevealingMode

INVARIANT_TOLERANCE = 1e-8
OPERATOR_TOLERANCE = 1e-10  # error operators below this are treated as exact


@dataclass(frozen=True)
class EffectiveCoverage:
    value: float
    per_step: dict[int, float] = field(default_factory=dict)
    tighter: Optional[float] = None  # absolute value outside the history expectation, memoryless pi_e only
    tighter_per_step: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def render(v: float):
            return "inf" if np.isinf(v) else v

        document = {"value": render(self.value), "perStep": {str(h): render(v) for h, v in self.per_step.items()}}
        if self.tighter is not None:
            document["tighter"] = render(self.tighter)
        return document


def _ratio(numerator: float, denominator: float) -> float:
    if denominator > 0:
        return numerator / denominator
    return 1.0 if numerator <= 0 else float("inf")


def error_operators(
    true_model: TabularPomdp,
    estimate: TabularPomdp,
    mode: RevealingMode,
    behavior: Policy,
    cap: Optional[int] = None,
) -> list[np.ndarray]:
    """D_h for h in [H-1], each of shape (|O_h|, A, dim_{h+1}, |S_h|)."""
    if not true_model.shares_observables_with(estimate):
        raise StructuralError("true and learned models disagree on horizon, actions or observation counts")
    learned = build_oom(estimate, mode, behavior if mode == RevealingMode.MULTI else None, cap=cap)
    if mode == RevealingMode.SINGLE:
        outcomes = list(true_model.emissions)
    else:
        outcomes = [m.matrix for m in outcome_matrices(true_model, behavior, down_to=1, cap=cap)][::-1]

    operators = []
    for h in range(1, true_model.horizon):
        decoded = learned.pseudo_inverses[h - 1] @ outcomes[h - 1]
        learned_part = np.einsum(
            "fs,oast,tu->oafu", learned.outcome_matrices[h], learned.cores[h - 1], decoded
        )
        true_core = np.einsum("ats,os->oats", true_model.transitions[h - 1], true_model.emissions[h - 1])
        true_part = np.einsum("fs,oast->oaft", outcomes[h], true_core)
        operators.append(learned_part - true_part)
    return operators


def _step_sums(model: TabularPomdp, layer, policy: Policy, operators: np.ndarray, tight: bool):
    """Sum over (o, a) and rows of pi(a|tau, o) ||D(o, a) x||_1 (and its absolute-outside variant)."""
    _, _, _, probs = _observe(model, layer, policy)
    probs = probs.reshape(layer.size, model.obs_counts[layer.depth], model.action_count)
    weighted = layer.alpha * layer.action_prob[:, None]
    inside, outside = 0.0, 0.0
    for o in range(operators.shape[0]):
        for a in range(operators.shape[1]):
            images = weighted @ operators[o, a].T
            inside += float(probs[:, o, a] @ np.abs(images).sum(axis=1))
            if tight:
                outside += float(np.abs(probs[:, o, a] @ images).sum())
    return inside, outside


def effective_coverage(
    true_model: TabularPomdp,
    estimate: TabularPomdp,
    target: Policy,
    behavior: Policy,
    mode: RevealingMode = RevealingMode.SINGLE,
    tighter: bool = False,
    cap: Optional[int] = None,
) -> EffectiveCoverage:
    mode = RevealingMode(mode)
    if mode == RevealingMode.MULTI and not behavior.is_memoryless:
        raise UnsupportedPolicyError(
            f"multi-step effective coverage needs a memoryless behavior policy, {behavior.policy_id} depends on the history"
        )
    if tighter and not target.is_memoryless:
        raise UnsupportedPolicyError("the tighter coefficient is defined for memoryless target policies only")
    target.check_compatible(true_model)
    behavior.check_compatible(true_model)

    operators = error_operators(true_model, estimate, mode, behavior, cap=cap)
    steps = range(1, true_model.horizon)
    if all(np.abs(d).max(initial=0.0) <= OPERATOR_TOLERANCE for d in operators):
        logging.debug("learned operators reproduce the true ones, effective coverage is 1 by convention")
        return EffectiveCoverage(1.0, {h: 1.0 for h in steps}, 1.0 if tighter else None, {h: 1.0 for h in steps} if tighter else {})

    depth = true_model.horizon - 2
    target_layers = history_layers(true_model, target, depth, cap=cap)
    behavior_layers = history_layers(true_model, behavior, depth, cap=cap)
    per_step, tighter_per_step = {}, {}
    for h, target_layer, behavior_layer in zip(steps, target_layers, behavior_layers):
        d = operators[h - 1]
        if np.abs(d).max(initial=0.0) <= OPERATOR_TOLERANCE:
            per_step[h] = 1.0
            if tighter:
                tighter_per_step[h] = 1.0
            continue
        numerator, outside = _step_sums(true_model, target_layer, target, d, tighter)
        denominator, _ = _step_sums(true_model, behavior_layer, behavior, d, False)
        per_step[h] = _ratio(numerator, denominator)
        if tighter:
            if outside > numerator + INVARIANT_TOLERANCE:
                raise CoefficientInvariantError(
                    f"tighter numerator {outside} exceeds the plain one {numerator} at step {h}"
                )
            tighter_per_step[h] = _ratio(outside, denominator)
        logging.debug(f"C_eff step {h}: {numerator:.3e} / {denominator:.3e}")

    value = max(per_step.values())
    tighter_value = max(tighter_per_step.values()) if tighter else None
    if tighter and tighter_value > value + INVARIANT_TOLERANCE:
        raise CoefficientInvariantError(f"tighter coefficient {tighter_value} exceeds {value}")
    return EffectiveCoverage(value, per_step, tighter_value, tighter_per_step)


def c_eff_single(
    true_model: TabularPomdp,
    estimate: TabularPomdp,
    target: Policy,
    behavior: Policy,
    tighter: bool = False,
    cap: Optional[int] = None,
) -> EffectiveCoverage:
    """C_eff,1: error operators measured through the emission matrices O_h."""
    return effective_coverage(true_model, estimate, target, behavior, RevealingMode.SINGLE, tighter, cap)


def c_eff_multi(
    true_model: TabularPomdp,
    estimate: TabularPomdp,
    target: Policy,
    behavior: Policy,
    tighter: bool = False,
    cap: Optional[int] = None,
) -> EffectiveCoverage:
    """C_eff,m: error operators measured through the outcome matrices U_{F,h}; `tighter` adds C~_eff,m."""
    return effective_coverage(true_model, estimate, target, behavior, RevealingMode.MULTI, tighter, cap)
