import logging
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from scipy.linalg import svdvals

from src.constructions.bundle import HardnessBundle, verify_bundle
from src.coverage.matrices import confusion_matrix, outcome_matrices
from src.estimators.model_class import ModelClass
from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy
from src.utils.errors import GenerationError, ParameterError
from src.utils.rng import make_rng
from src.utils.types import GenerationRevealing


@dataclass(frozen=True)
class RandomPomdpSpec:
    """
    Shape and revealing requirement of a random instance.

    `min_singular` bounds sigma_min of every Sigma_{O,h} (single) or Sigma_{F,h}
    under the uniform policy (multi); `max_attempts` bounds the rejection loop.
    """

    horizon: int
    state_counts: tuple[int, ...]
    action_count: int
    obs_counts: tuple[int, ...]
    revealing: GenerationRevealing = GenerationRevealing.NONE
    min_singular: float = 0.0
    reward_range: tuple[float, float] = (0.0, 1.0)
    max_attempts: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "state_counts", tuple(int(c) for c in self.state_counts))
        object.__setattr__(self, "obs_counts", tuple(int(c) for c in self.obs_counts))
        object.__setattr__(self, "revealing", GenerationRevealing(self.revealing))
        object.__setattr__(self, "reward_range", tuple(float(r) for r in self.reward_range))
        if self.horizon < 1:
            raise ParameterError(f"horizon must be positive, got {self.horizon}")
        if len(self.state_counts) != self.horizon or len(self.obs_counts) != self.horizon:
            raise ParameterError(f"state and observation counts need {self.horizon} entries each")
        if min(self.state_counts) < 1 or min(self.obs_counts) < 1 or self.action_count < 1:
            raise ParameterError("every state, observation and action count must be positive")
        low, high = self.reward_range
        if not 0.0 <= low <= high <= 1.0:
            raise ParameterError(f"reward range {self.reward_range} must lie inside [0, 1]")
        if self.max_attempts < 1:
            raise ParameterError(f"max_attempts must be positive, got {self.max_attempts}")
        if self.revealing == GenerationRevealing.SINGLE:
            short = [h for h, (s, o) in enumerate(zip(self.state_counts, self.obs_counts), start=1) if o < s]
            if short:
                raise ParameterError(f"single-step revealing needs |O_h| >= |S_h|, violated at steps {short}")

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> "RandomPomdpSpec":
        """Accept the camelCase keys of spec files as well as the field names."""
        aliases = {
            "H": "horizon",
            "stateCounts": "state_counts",
            "A": "action_count",
            "actionCount": "action_count",
            "obsCounts": "obs_counts",
            "revealingMode": "revealing",
            "minSingular": "min_singular",
            "rewardRange": "reward_range",
            "maxAttempts": "max_attempts",
        }
        fields = {aliases.get(key, key): value for key, value in dict(document).items()}
        unknown = set(fields) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown random-model keys: {sorted(unknown)}")
        return cls(**fields)


def _columns(rng: np.random.Generator, rows: int, columns: int) -> np.ndarray:
    """(rows, columns) matrix with Dirichlet(1) columns."""
    return rng.dirichlet(np.ones(rows), size=columns).T


def _emission(rng: np.random.Generator, spec: RandomPomdpSpec, k: int) -> np.ndarray:
    return _columns(rng, spec.obs_counts[k], spec.state_counts[k])


def _smallest_singular(matrix: np.ndarray) -> float:
    return float(svdvals(confusion_matrix(matrix))[-1])


def _revealing_emission(rng: np.random.Generator, spec: RandomPomdpSpec, k: int) -> np.ndarray:
    for attempt in range(1, spec.max_attempts + 1):
        emission = _emission(rng, spec, k)
        if _smallest_singular(emission) >= spec.min_singular:
            logging.debug(f"emission at step {k + 1} accepted after {attempt} attempts")
            return emission
    raise GenerationError(
        f"no emission at step {k + 1} reached sigma_min >= {spec.min_singular} in {spec.max_attempts} attempts"
    )


def _draw(rng: np.random.Generator, spec: RandomPomdpSpec, name: str) -> TabularPomdp:
    single = spec.revealing == GenerationRevealing.SINGLE
    low, high = spec.reward_range
    A = spec.action_count
    return TabularPomdp(
        horizon=spec.horizon,
        state_counts=spec.state_counts,
        action_count=A,
        obs_counts=spec.obs_counts,
        initial_dist=rng.dirichlet(np.ones(spec.state_counts[0])),
        transitions=[
            np.transpose(rng.dirichlet(np.ones(spec.state_counts[k + 1]), size=(A, spec.state_counts[k])), (0, 2, 1))
            for k in range(spec.horizon - 1)
        ],
        emissions=[
            _revealing_emission(rng, spec, k) if single else _emission(rng, spec, k) for k in range(spec.horizon)
        ],
        rewards=[rng.uniform(low, high, size=count) for count in spec.obs_counts],
        name=name,
    )


def _multi_step_revealing(model: TabularPomdp, min_singular: float) -> bool:
    for outcome in outcome_matrices(model, Policy.uniform(model)):
        if outcome.index.step < model.horizon and _smallest_singular(outcome.matrix) < min_singular:
            return False
    return True


def random_pomdp(spec: RandomPomdpSpec, rng: np.random.Generator, name: str = "random") -> TabularPomdp:
    """
    Draw a POMDP whose transition and emission columns are Dirichlet(1).

    single: each emission is redrawn until its confusion matrix has sigma_min >= min_singular.
    multi: the whole model is redrawn until every Sigma_{F,h}, h in [H-1], under the uniform
    policy does.

    :raises GenerationError: the rejection loop ran out of attempts
    """
    if spec.revealing != GenerationRevealing.MULTI:
        return _draw(rng, spec, name)
    for attempt in range(1, spec.max_attempts + 1):
        model = _draw(rng, spec, name)
        if _multi_step_revealing(model, spec.min_singular):
            logging.debug(f"multi-step revealing model accepted after {attempt} attempts")
            return model
    raise GenerationError(
        f"no model reached multi-step sigma_min >= {spec.min_singular} in {spec.max_attempts} attempts"
    )


def perturb_model(
    model: TabularPomdp,
    rng: np.random.Generator,
    magnitude: float,
    step: Optional[int] = None,
    action: Optional[int] = None,
    state: Optional[int] = None,
) -> TabularPomdp:
    """
    Move one transition column T_{h,a}(. | s) by `magnitude` in total variation.

    Mass is shifted toward the least likely next state, so every entry that was positive
    stays positive. Unspecified coordinates are drawn from `rng`.
    """
    if not 0.0 < magnitude <= 1.0:
        raise ParameterError(f"perturbation magnitude must lie in (0, 1], got {magnitude}")
    branching = [h for h in range(1, model.horizon) if model.state_counts[h] > 1]
    if not branching:
        raise ParameterError("model has no transition with more than one next state")
    if step is None:
        step = int(rng.choice(branching))
    if not 1 <= step < model.horizon:
        raise ParameterError(f"step must lie in [1, {model.horizon - 1}], got {step}")
    action = int(rng.integers(model.action_count)) if action is None else action
    state = int(rng.integers(model.state_counts[step - 1])) if state is None else state

    transitions = [np.array(t) for t in model.transitions]
    column = transitions[step - 1][action, :, state]
    target = int(np.argmin(column))
    room = 1.0 - column[target]
    if room < magnitude:
        raise ParameterError(
            f"column (h={step}, a={action}, s={state}) can move at most {room:.6g} in TV, asked for {magnitude}"
        )
    shift = magnitude / room
    moved = (1.0 - shift) * column
    moved[target] += shift
    transitions[step - 1][action, :, state] = moved
    logging.debug(f"perturbed T(h={step}, a={action}, s={state}) of {model.name or '<unnamed>'} by {magnitude}")
    return TabularPomdp(
        horizon=model.horizon,
        state_counts=model.state_counts,
        action_count=model.action_count,
        obs_counts=model.obs_counts,
        initial_dist=model.initial_dist,
        transitions=transitions,
        emissions=model.emissions,
        rewards=model.rewards,
        name=f"{model.name}+perturbed(h={step},a={action},s={state})",
    )


MLE_RATE_HORIZON = 5
MLE_RATE_PERTURBATIONS = 4
MLE_RATE_MAGNITUDE = 0.2


def mle_rate_model() -> TabularPomdp:
    """Two states, two observations, H = 5, single-step revealing; observation 0 pays 1."""
    emission = np.array([[0.85, 0.2], [0.15, 0.8]])
    dynamics = np.stack([np.array([[0.8, 0.3], [0.2, 0.7]]), np.array([[0.25, 0.6], [0.75, 0.4]])])
    H = MLE_RATE_HORIZON
    return TabularPomdp(
        horizon=H,
        state_counts=[2] * H,
        action_count=2,
        obs_counts=[2] * H,
        initial_dist=[0.6, 0.4],
        transitions=[dynamics] * (H - 1),
        emissions=[emission] * H,
        rewards=[np.array([1.0, 0.0])] * H,
        name="Mstar",
    )


def previous_observation_rule(h: int, history, o: int) -> int:
    """Repeat the previous observation as the action; the first step uses the current one."""
    return int(history[-1][0]) if history else int(o)


def mle_rate_bundle(seed: int = 0, verify: bool = True) -> HardnessBundle:
    """
    Fixed revealing instance with M* and four perturbed copies, for MLE convergence runs.

    The perturbations touch distinct transition columns chosen by `seed`.
    """
    truth = mle_rate_model()
    rng = make_rng(seed)
    positions = [(h, a, s) for h in range(1, truth.horizon) for a in range(2) for s in range(2)]
    chosen = rng.choice(len(positions), size=MLE_RATE_PERTURBATIONS, replace=False)
    perturbed = [
        perturb_model(truth, rng, MLE_RATE_MAGNITUDE, *positions[i]).renamed(f"M{j + 1}")
        for j, i in enumerate(sorted(chosen))
    ]
    behavior = Policy.uniform(truth, policy_id="pi_b")
    target = Policy.tabulate(truth, previous_observation_rule, policy_id="previous_observation")
    bundle = HardnessBundle(
        true_model=truth,
        model_class=ModelClass((truth, *perturbed), true_index=0),
        behavior_policy=behavior,
        target_policies=(target,),
        expected_coefficients={"cA": 2.0},
        name=f"mle-rate-seed{seed}",
    )
    if verify:
        verify_bundle(bundle)
    return bundle
