import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.utils.errors import StructuralError

STOCHASTIC_TOLERANCE = 1e-12


def _frozen(array) -> np.ndarray:
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


def _column_violations(matrix: np.ndarray, label: str, coordinates) -> list[str]:
    violations = []
    if not np.all(np.isfinite(matrix)):
        violations.append(f"{label} {coordinates(None)} has non-finite entries")
        return violations
    for column in np.flatnonzero(np.any(matrix < 0, axis=0)):
        violations.append(f"{label} {coordinates(column)} has a negative entry")
    sums = matrix.sum(axis=0)
    for column in np.flatnonzero(np.abs(sums - 1.0) > STOCHASTIC_TOLERANCE):
        violations.append(f"{label} {coordinates(column)} sums to {sums[column]:.12g}")
    return violations


def model_violations(
    horizon: int,
    state_counts: Sequence[int],
    action_count: int,
    obs_counts: Sequence[int],
    initial_dist,
    transitions: Sequence,
    emissions: Sequence,
    rewards: Sequence,
) -> list[str]:
    """
    Collect every structural violation of a tabular POMDP description.

    Steps are reported 1-based, state/observation/action indices 0-based.

    :return: List of violations; empty when the description is valid
    """
    violations = []
    if horizon < 1:
        return [f"horizon must be positive, got {horizon}"]
    if action_count < 1:
        violations.append(f"action_count must be positive, got {action_count}")
    if len(state_counts) != horizon:
        violations.append(f"state_counts has {len(state_counts)} entries, horizon is {horizon}")
    if len(obs_counts) != horizon:
        violations.append(f"obs_counts has {len(obs_counts)} entries, horizon is {horizon}")
    if len(transitions) != horizon - 1:
        violations.append(f"transitions has {len(transitions)} steps, expected {horizon - 1}")
    if len(emissions) != horizon:
        violations.append(f"emissions has {len(emissions)} steps, expected {horizon}")
    if len(rewards) != horizon:
        violations.append(f"rewards has {len(rewards)} steps, expected {horizon}")
    for name, counts in (("state_counts", state_counts), ("obs_counts", obs_counts)):
        for index, count in enumerate(counts):
            if count < 1:
                violations.append(f"{name}[h={index + 1}] must be positive, got {count}")
    if violations:
        return violations

    d1 = np.asarray(initial_dist, dtype=np.float64)
    if d1.shape != (state_counts[0],):
        violations.append(f"initial_dist has shape {d1.shape}, expected ({state_counts[0]},)")
    elif not np.all(np.isfinite(d1)) or np.any(d1 < 0):
        violations.append("initial_dist has negative or non-finite entries")
    elif abs(d1.sum() - 1.0) > STOCHASTIC_TOLERANCE:
        violations.append(f"initial_dist sums to {d1.sum():.12g}")

    for k, step_transitions in enumerate(transitions):
        tensor = np.asarray(step_transitions, dtype=np.float64)
        expected = (action_count, state_counts[k + 1], state_counts[k])
        if tensor.shape != expected:
            violations.append(f"transitions[h={k + 1}] has shape {tensor.shape}, expected {expected}")
            continue
        for a in range(action_count):
            violations.extend(
                _column_violations(
                    tensor[a],
                    "transition column",
                    lambda s, k=k, a=a: f"(h={k + 1}, a={a})" if s is None else f"(h={k + 1}, a={a}, s={s})",
                )
            )

    for k, emission in enumerate(emissions):
        matrix = np.asarray(emission, dtype=np.float64)
        expected = (obs_counts[k], state_counts[k])
        if matrix.shape != expected:
            violations.append(f"emissions[h={k + 1}] has shape {matrix.shape}, expected {expected}")
            continue
        violations.extend(
            _column_violations(
                matrix,
                "emission column",
                lambda s, k=k: f"(h={k + 1})" if s is None else f"(h={k + 1}, s={s})",
            )
        )

    for k, reward in enumerate(rewards):
        vector = np.asarray(reward, dtype=np.float64)
        if vector.shape != (obs_counts[k],):
            violations.append(f"rewards[h={k + 1}] has shape {vector.shape}, expected ({obs_counts[k]},)")
            continue
        for o in np.flatnonzero(~((vector >= 0.0) & (vector <= 1.0))):
            violations.append(f"reward (h={k + 1}, o={o}) = {vector[o]:.12g} outside [0, 1]")
    return violations


@dataclass(frozen=True, eq=False)
class TabularPomdp:
    """
    Finite-horizon tabular POMDP with per-step state and observation spaces.

    - transitions[k] has shape (A, |S_{k+2}|, |S_{k+1}|) and is column-stochastic per action
    - emissions[k] has shape (|O_{k+1}|, |S_{k+1}|)
    - rewards[k][o] is the known reward of observation o at step k + 1

    Arrays are stored read-only, so instances can be shared between threads.
    """

    horizon: int
    state_counts: tuple[int, ...]
    action_count: int
    obs_counts: tuple[int, ...]
    initial_dist: np.ndarray
    transitions: tuple[np.ndarray, ...]
    emissions: tuple[np.ndarray, ...]
    rewards: tuple[np.ndarray, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "action_count", int(self.action_count))
        object.__setattr__(self, "state_counts", tuple(int(c) for c in self.state_counts))
        object.__setattr__(self, "obs_counts", tuple(int(c) for c in self.obs_counts))
        try:
            object.__setattr__(self, "initial_dist", _frozen(self.initial_dist))
            object.__setattr__(self, "transitions", tuple(_frozen(t) for t in self.transitions))
            object.__setattr__(self, "emissions", tuple(_frozen(o) for o in self.emissions))
            object.__setattr__(self, "rewards", tuple(_frozen(r) for r in self.rewards))
        except ValueError as e:
            raise StructuralError(f"ragged or non-numeric arrays: {e}")

        violations = model_violations(
            self.horizon,
            self.state_counts,
            self.action_count,
            self.obs_counts,
            self.initial_dist,
            self.transitions,
            self.emissions,
            self.rewards,
        )
        if violations:
            raise StructuralError(violations)
        logging.debug(
            f"TabularPomdp {self.name or '<unnamed>'}: H={self.horizon}, S={self.state_counts}, "
            f"A={self.action_count}, O={self.obs_counts}"
        )

    def transition(self, h: int, a: int) -> np.ndarray:
        """T_{h,a}, shape (|S_{h+1}|, |S_h|)."""
        return self.transitions[h - 1][a]

    def emission(self, h: int) -> np.ndarray:
        """O_h, shape (|O_h|, |S_h|)."""
        return self.emissions[h - 1]

    def reward(self, h: int) -> np.ndarray:
        return self.rewards[h - 1]

    def enumeration_size(self, depth: Optional[int] = None) -> int:
        """Number of (o, a) sequences of length `depth` (default H): prod_h |O_h| * A."""
        depth = self.horizon if depth is None else depth
        size = 1
        for count in self.obs_counts[:depth]:
            size *= count * self.action_count
        return size

    def dense_size(self) -> int:
        """Number of stored transition and emission entries."""
        return sum(t.size for t in self.transitions) + sum(o.size for o in self.emissions)

    def shares_observables_with(self, other: "TabularPomdp") -> bool:
        return (
            self.horizon == other.horizon
            and self.action_count == other.action_count
            and self.obs_counts == other.obs_counts
        )

    def renamed(self, name: str) -> "TabularPomdp":
        return TabularPomdp(
            horizon=self.horizon,
            state_counts=self.state_counts,
            action_count=self.action_count,
            obs_counts=self.obs_counts,
            initial_dist=self.initial_dist,
            transitions=self.transitions,
            emissions=self.emissions,
            rewards=self.rewards,
            name=name,
        )
