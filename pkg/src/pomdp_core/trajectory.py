from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from src.pomdp_core.model import TabularPomdp
from src.utils.errors import StructuralError

# A partial history tau_h as ((o_1, a_1), ..., (o_h, a_h))
History = tuple[tuple[int, int], ...]

REWARD_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Trajectory:
    """One complete episode: (o_h, a_h, r_h) for h = 1..H."""

    observations: tuple[int, ...]
    actions: tuple[int, ...]
    rewards: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(int(o) for o in self.observations))
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))
        object.__setattr__(self, "rewards", tuple(float(r) for r in self.rewards))
        if not len(self.observations) == len(self.actions) == len(self.rewards):
            raise StructuralError(
                f"trajectory has {len(self.observations)} observations, {len(self.actions)} actions "
                f"and {len(self.rewards)} rewards"
            )

    @classmethod
    def from_steps(cls, steps: Iterable[tuple[int, int, float]]) -> "Trajectory":
        steps = list(steps)
        return cls(
            observations=tuple(s[0] for s in steps),
            actions=tuple(s[1] for s in steps),
            rewards=tuple(s[2] for s in steps),
        )

    @classmethod
    def from_history(cls, model: TabularPomdp, history: Sequence[tuple[int, int]]) -> "Trajectory":
        """Complete a full (o, a) sequence with the model's known rewards."""
        rewards = tuple(float(model.reward(h)[o]) for h, (o, _) in enumerate(history, start=1))
        return cls(
            observations=tuple(o for o, _ in history),
            actions=tuple(a for _, a in history),
            rewards=rewards,
        )

    @property
    def steps(self) -> tuple[tuple[int, int, float], ...]:
        return tuple(zip(self.observations, self.actions, self.rewards))

    @property
    def horizon(self) -> int:
        return len(self.observations)

    @property
    def total_return(self) -> float:
        return float(sum(self.rewards))

    def history(self, h: Optional[int] = None) -> History:
        """tau_h, the first h (o, a) pairs."""
        h = self.horizon if h is None else h
        return tuple(zip(self.observations[:h], self.actions[:h]))

    def validate(self, model: TabularPomdp) -> None:
        violations = trajectory_violations(
            model,
            np.asarray(self.observations)[None, :],
            np.asarray(self.actions)[None, :],
            np.asarray(self.rewards, dtype=np.float64)[None, :],
        )
        if violations:
            raise StructuralError(violations)


def history_violations(model: TabularPomdp, history: Sequence[tuple[int, int]]) -> list[str]:
    violations = []
    if len(history) > model.horizon:
        violations.append(f"history has {len(history)} steps, horizon is {model.horizon}")
        return violations
    for h, (o, a) in enumerate(history, start=1):
        if not 0 <= o < model.obs_counts[h - 1]:
            violations.append(f"observation {o} at step {h} out of range [0, {model.obs_counts[h - 1]})")
        if not 0 <= a < model.action_count:
            violations.append(f"action {a} at step {h} out of range [0, {model.action_count})")
    return violations


def trajectory_violations(
    model: TabularPomdp,
    observations: np.ndarray,
    actions: np.ndarray,
    rewards: Optional[np.ndarray] = None,
) -> list[str]:
    """
    Structural checks of a batch of trajectories against a model.

    :return: Violations naming (trajectory, step) coordinates, steps 1-based
    """
    observations = np.asarray(observations)
    actions = np.asarray(actions)
    if observations.ndim != 2 or observations.shape[1] != model.horizon:
        return [f"trajectories have shape {observations.shape}, expected (n, {model.horizon})"]
    if actions.shape != observations.shape:
        return [f"actions have shape {actions.shape}, observations {observations.shape}"]
    violations = []
    for k in range(model.horizon):
        bad = np.flatnonzero((observations[:, k] < 0) | (observations[:, k] >= model.obs_counts[k]))
        violations.extend(f"trajectory {i}: observation {observations[i, k]} at step {k + 1} out of range" for i in bad)
        bad = np.flatnonzero((actions[:, k] < 0) | (actions[:, k] >= model.action_count))
        violations.extend(f"trajectory {i}: action {actions[i, k]} at step {k + 1} out of range" for i in bad)
    if rewards is not None and not violations:
        rewards = np.asarray(rewards, dtype=np.float64)
        for k in range(model.horizon):
            expected = model.rewards[k][observations[:, k]]
            bad = np.flatnonzero(np.abs(rewards[:, k] - expected) > REWARD_TOLERANCE)
            violations.extend(
                f"trajectory {i}: reward {rewards[i, k]:.12g} at step {k + 1} differs from R(h, o) = {expected[i]:.12g}"
                for i in bad
            )
    return violations


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    n complete trajectories stored column-wise.

    observations, actions: int arrays of shape (n, H); rewards: float array of shape (n, H).
    """

    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    behavior_policy_id: str = ""
    seed: int = 0

    def __post_init__(self):
        observations = np.array(self.observations, dtype=np.int64, ndmin=2)
        actions = np.array(self.actions, dtype=np.int64, ndmin=2)
        rewards = np.array(self.rewards, dtype=np.float64, ndmin=2)
        if not observations.shape == actions.shape == rewards.shape:
            raise StructuralError(
                f"dataset arrays disagree: observations {observations.shape}, actions {actions.shape}, "
                f"rewards {rewards.shape}"
            )
        for array in (observations, actions, rewards):
            array.setflags(write=False)
        object.__setattr__(self, "observations", observations)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def from_trajectories(
        cls,
        trajectories: Sequence[Trajectory],
        horizon: int,
        behavior_policy_id: str = "",
        seed: int = 0,
    ) -> "Dataset":
        if any(t.horizon != horizon for t in trajectories):
            raise StructuralError(f"every trajectory must have length {horizon}")
        shape = (len(trajectories), horizon)
        return cls(
            observations=np.array([t.observations for t in trajectories], dtype=np.int64).reshape(shape),
            actions=np.array([t.actions for t in trajectories], dtype=np.int64).reshape(shape),
            rewards=np.array([t.rewards for t in trajectories], dtype=np.float64).reshape(shape),
            behavior_policy_id=behavior_policy_id,
            seed=seed,
        )

    @property
    def n(self) -> int:
        return self.observations.shape[0]

    @property
    def horizon(self) -> int:
        return self.observations.shape[1]

    @property
    def trajectories(self) -> list[Trajectory]:
        return [
            Trajectory(tuple(o), tuple(a), tuple(r))
            for o, a, r in zip(self.observations.tolist(), self.actions.tolist(), self.rewards.tolist())
        ]

    @property
    def returns(self) -> np.ndarray:
        return self.rewards.sum(axis=1)

    def validate(self, model: TabularPomdp) -> None:
        violations = trajectory_violations(model, self.observations, self.actions, self.rewards)
        if violations:
            raise StructuralError(violations)

    def __len__(self) -> int:
        return self.n
