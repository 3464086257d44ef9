import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from src.coverage.coefficients import compute_c_a, history_sigmas, sigma_obs
from src.coverage.prefilter import revealing_coefficients
from src.estimators.model_class import ModelClass
from src.pomdp_core.inference import policy_value
from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy
from src.utils.errors import GenerationError
from src.utils.types import RevealingMode

VALUE_TOLERANCE = 1e-12
COEFFICIENT_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class HardnessBundle:
    """
    A true model with its candidate class, policies and golden values.

    `expected_values` maps a target policy id to J_{M*}(pi); `expected_model_values` maps
    "<model name>/<policy id>" to the value of a policy in a class member.
    """

    true_model: TabularPomdp
    model_class: ModelClass
    behavior_policy: Policy
    target_policies: tuple[Policy, ...]
    expected_values: dict[str, float] = field(default_factory=dict)
    expected_coefficients: dict[str, float] = field(default_factory=dict)
    expected_model_values: dict[str, float] = field(default_factory=dict)
    name: str = ""

    def target(self, policy_id: str) -> Policy:
        for policy in (*self.target_policies, self.behavior_policy):
            if policy.policy_id == policy_id:
                return policy
        raise KeyError(policy_id)

    def model(self, name: str) -> TabularPomdp:
        for model in (self.true_model, *self.model_class.models):
            if model.name == name:
                return model
        raise KeyError(name)

    def expected_document(self) -> dict:
        def render(v: float):
            return "inf" if np.isinf(v) else v

        return {
            "name": self.name,
            "behaviorPolicy": self.behavior_policy.policy_id,
            "values": dict(self.expected_values),
            "modelValues": dict(self.expected_model_values),
            "coefficients": {k: render(v) for k, v in self.expected_coefficients.items()},
        }


def _max_coefficient(values) -> float:
    return max(values, default=1.0)


def _coefficient_rules(bundle: HardnessBundle, cap: Optional[int]) -> dict[str, Callable[[], float]]:
    """How every coefficient name in a bundle is recomputed."""
    truth, behavior = bundle.true_model, bundle.behavior_policy
    steps = range(1, truth.horizon)
    rules = {
        "cA": lambda: compute_c_a(truth, behavior, cap=cap),
        "cH": lambda: _max_coefficient(r.coefficient for r in history_sigmas(truth, behavior, cap=cap)),
        "cO": lambda: _max_coefficient(sigma_obs(truth, h).coefficient for h in steps),
        "cF": lambda: _max_coefficient(revealing_coefficients(truth, behavior, RevealingMode.MULTI, cap=cap).values()),
    }
    for member in bundle.model_class.models:
        rules[f"cO({member.name})"] = lambda member=member: _max_coefficient(
            sigma_obs(member, h).coefficient for h in steps
        )
    return rules


def _matches(expected: float, actual: float, tolerance: float) -> bool:
    if np.isinf(expected) or np.isinf(actual):
        return bool(np.isinf(expected) and np.isinf(actual))
    return abs(expected - actual) <= tolerance


def verify_bundle(bundle: HardnessBundle, cap: Optional[int] = None) -> None:
    """
    Re-derive every golden value with the core and coverage code.

    :raises GenerationError: listing every mismatch
    """
    mismatches = []
    for policy_id, expected in bundle.expected_values.items():
        actual = policy_value(bundle.true_model, bundle.target(policy_id), cap=cap)
        if not _matches(expected, actual, VALUE_TOLERANCE):
            mismatches.append(f"J({policy_id}) = {actual}, expected {expected}")
    for key, expected in bundle.expected_model_values.items():
        model_name, policy_id = key.split("/", 1)
        actual = policy_value(bundle.model(model_name), bundle.target(policy_id), cap=cap)
        if not _matches(expected, actual, VALUE_TOLERANCE):
            mismatches.append(f"J_{model_name}({policy_id}) = {actual}, expected {expected}")
    rules = _coefficient_rules(bundle, cap)
    for name, expected in bundle.expected_coefficients.items():
        actual = rules[name]()
        if not _matches(expected, actual, COEFFICIENT_TOLERANCE):
            mismatches.append(f"{name} = {actual}, expected {expected}")
    if mismatches:
        raise GenerationError(f"bundle {bundle.name} does not reproduce its golden values: " + "; ".join(mismatches))
    logging.debug(f"bundle {bundle.name} verified ({len(bundle.expected_values)} values, {len(bundle.expected_coefficients)} coefficients)")
