import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from src.pomdp_core.model import STOCHASTIC_TOLERANCE, TabularPomdp
from src.pomdp_core.trajectory import History
from src.utils.errors import CapacityError, StructuralError, UnsupportedPolicyError
from src.utils.settings_manager import resolve_enumeration_cap
from src.utils.types import PolicyKind

HistoryKey = tuple[int, str, int]


def encode_history(observations: Sequence[int], actions: Sequence[int], action_count: int) -> str:
    """
    Radix-encode a history tau_{h-1}.

    Each step contributes the base-36 digits of o * A + a; steps are joined with '.'.
    The empty history encodes to ''.
    """
    return ".".join(np.base_repr(int(o) * action_count + int(a), 36) for o, a in zip(observations, actions))


def encode_pairs(history: Sequence[tuple[int, int]], action_count: int) -> str:
    return encode_history([o for o, _ in history], [a for _, a in history], action_count)


def _distribution_violations(distribution: np.ndarray, where: str) -> list[str]:
    if not np.all(np.isfinite(distribution)) or np.any(distribution < 0):
        return [f"{where} has negative or non-finite probabilities"]
    total = distribution.sum(axis=-1)
    if np.any(np.abs(total - 1.0) > STOCHASTIC_TOLERANCE):
        return [f"{where} sums to {np.atleast_1d(total)[np.argmax(np.abs(total - 1.0))]:.12g}"]
    return []


@dataclass(frozen=True, eq=False)
class Policy:
    """
    Action-selection rule for the whole horizon.

    - MEMORYLESS: tables[h-1][o, a] = pi_h(a | o)
    - OPEN_LOOP: actions[h-1] is taken at step h whatever was observed
    - HISTORY_TABLE: entries[(h, encode_history(tau_{h-1}), o_h)] is a distribution over actions,
      `default` covers every unlisted key

    Open-loop policies ignore the history, so they count as memoryless.
    """

    kind: PolicyKind
    action_count: int
    horizon: int
    tables: tuple[np.ndarray, ...] = ()
    actions: tuple[int, ...] = ()
    entries: Mapping[HistoryKey, np.ndarray] = field(default_factory=dict)
    default: Optional[np.ndarray] = None
    policy_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        violations = []
        if self.kind == PolicyKind.MEMORYLESS:
            tables = tuple(np.array(t, dtype=np.float64) for t in self.tables)
            if len(tables) != self.horizon:
                violations.append(f"memoryless policy has {len(tables)} tables, horizon is {self.horizon}")
            for h, table in enumerate(tables, start=1):
                if table.ndim != 2 or table.shape[1] != self.action_count:
                    violations.append(f"table at step {h} has shape {table.shape}, expected (|O_h|, {self.action_count})")
                    continue
                violations.extend(_distribution_violations(table, f"policy table at step {h}"))
                table.setflags(write=False)
            object.__setattr__(self, "tables", tables)
        elif self.kind == PolicyKind.OPEN_LOOP:
            actions = tuple(int(a) for a in self.actions)
            if len(actions) != self.horizon:
                violations.append(f"open-loop policy has {len(actions)} actions, horizon is {self.horizon}")
            violations.extend(
                f"open-loop action {a} at step {h} out of range"
                for h, a in enumerate(actions, start=1)
                if not 0 <= a < self.action_count
            )
            object.__setattr__(self, "actions", actions)
        else:
            if self.default is None:
                violations.append("history-table policy needs a default distribution")
            else:
                default = np.array(self.default, dtype=np.float64)
                if default.shape != (self.action_count,):
                    violations.append(f"default distribution has shape {default.shape}")
                else:
                    violations.extend(_distribution_violations(default, "default distribution"))
                default.setflags(write=False)
                object.__setattr__(self, "default", default)
            entries = {}
            for (h, key, o), distribution in dict(self.entries).items():
                distribution = np.array(distribution, dtype=np.float64)
                if distribution.shape != (self.action_count,):
                    violations.append(f"entry (h={h}, history='{key}', o={o}) has shape {distribution.shape}")
                    continue
                violations.extend(_distribution_violations(distribution, f"entry (h={h}, history='{key}', o={o})"))
                distribution.setflags(write=False)
                entries[(int(h), str(key), int(o))] = distribution
            object.__setattr__(self, "entries", MappingProxyType(entries))
        if violations:
            raise StructuralError(violations)
        object.__setattr__(self, "_entry_steps", frozenset(h for h, _, _ in self.entries))
        if not self.policy_id:
            object.__setattr__(self, "policy_id", self.kind.value)

    # Constructors

    @classmethod
    def memoryless(cls, tables: Sequence, policy_id: str = "") -> "Policy":
        tables = [np.asarray(t, dtype=np.float64) for t in tables]
        return cls(
            kind=PolicyKind.MEMORYLESS,
            action_count=tables[0].shape[1],
            horizon=len(tables),
            tables=tuple(tables),
            policy_id=policy_id,
        )

    @classmethod
    def open_loop(cls, actions: Sequence[int], action_count: int, policy_id: str = "") -> "Policy":
        return cls(
            kind=PolicyKind.OPEN_LOOP,
            action_count=action_count,
            horizon=len(actions),
            actions=tuple(actions),
            policy_id=policy_id,
        )

    @classmethod
    def history_table(
        cls,
        entries: Mapping[HistoryKey, Sequence[float]],
        default: Sequence[float],
        horizon: int,
        action_count: int,
        policy_id: str = "",
    ) -> "Policy":
        return cls(
            kind=PolicyKind.HISTORY_TABLE,
            action_count=action_count,
            horizon=horizon,
            entries=entries,
            default=np.asarray(default, dtype=np.float64),
            policy_id=policy_id,
        )

    @classmethod
    def uniform(cls, model: TabularPomdp, policy_id: str = "uniform") -> "Policy":
        A = model.action_count
        return cls.memoryless([np.full((count, A), 1.0 / A) for count in model.obs_counts], policy_id=policy_id)

    @classmethod
    def tabulate(
        cls,
        model: TabularPomdp,
        rule: Callable[[int, History, int], Union[int, Sequence[float]]],
        policy_id: str = "",
        cap: Optional[int] = None,
    ) -> "Policy":
        """
        Tabulate a history-dependent rule over every (h, tau_{h-1}, o_h).

        `rule` returns either an action index or a distribution over actions.
        """
        cap = resolve_enumeration_cap(cap)
        required = sum(model.enumeration_size(h - 1) * model.obs_counts[h - 1] for h in range(1, model.horizon + 1))
        if required > cap:
            raise CapacityError(required, cap, what="policy tabulation")
        A = model.action_count
        entries = {}
        histories: list[History] = [()]
        for h in range(1, model.horizon + 1):
            next_histories = []
            for history in histories:
                key = encode_pairs(history, A)
                for o in range(model.obs_counts[h - 1]):
                    choice = rule(h, history, o)
                    if np.isscalar(choice):
                        distribution = np.zeros(A)
                        distribution[int(choice)] = 1.0
                    else:
                        distribution = np.asarray(choice, dtype=np.float64)
                    entries[(h, key, o)] = distribution
                    if h < model.horizon:
                        next_histories.extend(history + ((o, a),) for a in range(A))
            histories = next_histories
        logging.debug(f"Tabulated policy {policy_id or '<unnamed>'} with {len(entries)} entries")
        return cls.history_table(entries, np.full(A, 1.0 / A), model.horizon, A, policy_id=policy_id)

    # Queries

    @property
    def is_memoryless(self) -> bool:
        return self.kind != PolicyKind.HISTORY_TABLE

    def check_compatible(self, model: TabularPomdp) -> None:
        violations = []
        if self.horizon != model.horizon:
            violations.append(f"policy horizon {self.horizon} differs from model horizon {model.horizon}")
        if self.action_count != model.action_count:
            violations.append(f"policy has {self.action_count} actions, model has {model.action_count}")
        if self.kind == PolicyKind.MEMORYLESS and not violations:
            violations.extend(
                f"policy table at step {h} covers {table.shape[0]} observations, model has {count}"
                for h, (table, count) in enumerate(zip(self.tables, model.obs_counts), start=1)
                if table.shape[0] != count
            )
        if violations:
            raise StructuralError(violations)

    def memoryless_table(self, h: int, obs_count: int) -> np.ndarray:
        """pi_h(a | o) as an (|O_h|, A) matrix."""
        if self.kind == PolicyKind.MEMORYLESS:
            return self.tables[h - 1]
        if self.kind == PolicyKind.OPEN_LOOP:
            table = np.zeros((obs_count, self.action_count))
            table[:, self.actions[h - 1]] = 1.0
            return table
        raise UnsupportedPolicyError(f"policy {self.policy_id} depends on the history")

    def action_probs(self, h: int, history: Sequence[tuple[int, int]], o: int) -> np.ndarray:
        """pi(. | tau_{h-1}, o_h) for a single history."""
        if self.kind == PolicyKind.MEMORYLESS:
            return self.tables[h - 1][o]
        if self.kind == PolicyKind.OPEN_LOOP:
            return self.memoryless_table(h, o + 1)[o]
        if h not in self._entry_steps:
            return self.default
        return self.entries.get((h, encode_pairs(history[: h - 1], self.action_count), int(o)), self.default)

    def batch_probs(self, h: int, observations: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """
        Action distributions at step h for a batch of histories.

        :param observations: (N, >= h) observations, column h-1 is o_h
        :param actions: (N, >= h-1) actions
        :return: (N, A) matrix of pi(. | tau_{h-1}, o_h)
        """
        observations = np.asarray(observations)
        n = observations.shape[0]
        if self.kind == PolicyKind.MEMORYLESS:
            return self.tables[h - 1][observations[:, h - 1]]
        if self.kind == PolicyKind.OPEN_LOOP:
            probs = np.zeros((n, self.action_count))
            probs[:, self.actions[h - 1]] = 1.0
            return probs
        probs = np.empty((n, self.action_count))
        probs[:] = self.default
        if h not in self._entry_steps:
            return probs
        actions = np.asarray(actions)
        for i in range(n):
            key = (h, encode_history(observations[i, : h - 1], actions[i, : h - 1], self.action_count), int(observations[i, h - 1]))
            distribution = self.entries.get(key)
            if distribution is not None:
                probs[i] = distribution
        return probs
