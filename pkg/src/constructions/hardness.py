"""
The two separation instances.

Action 0 is L and action 1 is R throughout.

- theorem3: a chain of single states with one L/R branch at step H-1; two target
  policies that only disagree on the all-L history, which a uniform behavior policy
  almost never produces.
- theorem6: the same observable process as the chain, plus two class members whose
  latent states record the action history. They agree on every dataset that lacks
  the all-R action sequence, yet disagree on the value of always-R.
"""

import logging
from typing import Optional

import numpy as np

from src.constructions.bundle import HardnessBundle, verify_bundle
from src.estimators.model_class import ModelClass
from src.pomdp_core.enumeration import check_capacity
from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy, encode_history
from src.utils.errors import ParameterError

L, R = 0, 1
MIN_HORIZON = 3


def _check_horizon(horizon: int) -> None:
    if horizon < MIN_HORIZON:
        raise ParameterError(f"the construction needs H >= {MIN_HORIZON}, got {horizon}")


def branching_chain(horizon: int, name: str = "Mstar") -> TabularPomdp:
    """
    Single state for h < H; at step H-1 action L leads to s_(H,L) and R to s_(H,R).

    Emissions are the identity, so o_H reveals the branch; only o_(H,L) is rewarded.
    """
    _check_horizon(horizon)
    transitions = [np.ones((2, 1, 1)) for _ in range(horizon - 2)]
    branch = np.zeros((2, 2, 1))
    branch[L, 0, 0] = 1.0
    branch[R, 1, 0] = 1.0
    transitions.append(branch)
    rewards = [np.zeros(1) for _ in range(horizon - 1)] + [np.array([1.0, 0.0])]
    return TabularPomdp(
        horizon=horizon,
        state_counts=[1] * (horizon - 1) + [2],
        action_count=2,
        obs_counts=[1] * (horizon - 1) + [2],
        initial_dist=[1.0],
        transitions=transitions,
        emissions=[np.eye(1)] * (horizon - 1) + [np.eye(2)],
        rewards=rewards,
        name=name,
    )


def all_left_key(horizon: int) -> str:
    """Encoded history tau_{H-2} in which every observation is 0 and every action is L."""
    return encode_history([0] * (horizon - 2), [L] * (horizon - 2), 2)


def branch_policy(horizon: int, branch_action: int, policy_id: str) -> Policy:
    """Take L everywhere except `branch_action` at step H-1 after an all-L history."""
    choice = np.zeros(2)
    choice[branch_action] = 1.0
    return Policy.history_table(
        {(horizon - 1, all_left_key(horizon), 0): choice},
        default=[1.0, 0.0],
        horizon=horizon,
        action_count=2,
        policy_id=policy_id,
    )


def theorem3_instance(horizon: int, verify: bool = True, cap: Optional[int] = None) -> HardnessBundle:
    """
    Chain instance on which model-free estimators cannot tell pi_1 from pi_2.

    pi_1 takes L at step H-1 after the all-L history, pi_2 takes R there; both take L
    everywhere else, including on every history that contains an R.
    """
    _check_horizon(horizon)
    model = branching_chain(horizon)
    behavior = Policy.uniform(model, policy_id="pi_b")
    pi_1 = branch_policy(horizon, L, "pi_1")
    pi_2 = branch_policy(horizon, R, "pi_2")
    bundle = HardnessBundle(
        true_model=model,
        model_class=ModelClass((model,), true_index=0),
        behavior_policy=behavior,
        target_policies=(pi_1, pi_2),
        expected_values={"pi_1": 1.0, "pi_2": 0.0, "pi_b": 0.5},
        expected_coefficients={"cA": 2.0, "cH": 1.0, "cO": 1.0, "cF": 1.0},
        name=f"theorem3-H{horizon}",
    )
    if verify:
        verify_bundle(bundle, cap=cap)
    logging.info(f"Built {bundle.name}")
    return bundle


def history_recording_model(horizon: int, knife_edge: bool, name: str) -> TabularPomdp:
    """
    States at step h < H are the action strings {L, R}^(h-1), indexed s' = 2s + a.

    Step H has states (good, bad); a_{H-1} = L reaches good. With `knife_edge`, the
    all-R state at step H-1 also reaches good under R.
    """
    transitions = []
    for k in range(horizon - 2):
        size = 2**k
        tensor = np.zeros((2, 2 * size, size))
        for a in (L, R):
            tensor[a, 2 * np.arange(size) + a, np.arange(size)] = 1.0
        transitions.append(tensor)
    size = 2 ** (horizon - 2)
    last = np.zeros((2, 2, size))
    last[L, 0, :] = 1.0
    last[R, 1, :] = 1.0
    if knife_edge:
        all_right = size - 1
        last[R, :, all_right] = [1.0, 0.0]
    transitions.append(last)
    state_counts = [2**k for k in range(horizon - 1)] + [2]
    return TabularPomdp(
        horizon=horizon,
        state_counts=state_counts,
        action_count=2,
        obs_counts=[1] * (horizon - 1) + [2],
        initial_dist=[1.0],
        transitions=transitions,
        emissions=[np.ones((1, count)) for count in state_counts[:-1]] + [np.eye(2)],
        rewards=[np.zeros(1) for _ in range(horizon - 1)] + [np.array([1.0, 0.0])],
        name=name,
    )


def theorem6_instance(horizon: int, verify: bool = True, cap: Optional[int] = None) -> HardnessBundle:
    """
    Knife-edge class {M1, M2} around the chain M*.

    M1 is observably identical to M*. M2 differs only on the all-R history, so the two
    have equal likelihood on any dataset that never plays R for steps 1..H-1, while
    J_M2(always R) = 1 and J_M*(always R) = 0. Neither member is single-step revealing.
    """
    _check_horizon(horizon)
    dense = sum(2 * 2 ** (k + 1) * 2**k for k in range(horizon - 2)) + 2 * 2 * 2 ** (horizon - 2)
    check_capacity(dense, cap, what=f"history-recording model at H={horizon}")
    truth = branching_chain(horizon)
    recording = history_recording_model(horizon, knife_edge=False, name="M1")
    knife_edge = history_recording_model(horizon, knife_edge=True, name="M2")
    behavior = Policy.uniform(truth, policy_id="pi_b")
    always_right = Policy.open_loop([R] * horizon, 2, policy_id="always_R")
    bundle = HardnessBundle(
        true_model=truth,
        model_class=ModelClass((recording, knife_edge)),
        behavior_policy=behavior,
        target_policies=(always_right,),
        expected_values={"always_R": 0.0},
        expected_coefficients={"cA": 2.0, "cH": 1.0, "cO": 1.0, "cO(M1)": float("inf"), "cO(M2)": float("inf")},
        expected_model_values={"M1/always_R": 0.0, "M2/always_R": 1.0},
        name=f"theorem6-H{horizon}",
    )
    if verify:
        verify_bundle(bundle, cap=cap)
    logging.info(f"Built {bundle.name}")
    return bundle
