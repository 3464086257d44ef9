"""
Text formats for models, policies and datasets.

- model: JSON object with horizon, state_counts, action_count, obs_counts, initial_dist,
  transitions [h][a][s'][s], emissions [h][o][s], rewards [h][o]
- policy: JSON object with `kind` plus tables (memoryless), actions (open_loop) or
  entries/default (history_table)
- dataset: header `n=<int> seed=<int> policy=<id>`, then one trajectory per line as
  whitespace-separated `o a r` triples
"""

import json
import logging
from pathlib import Path
from typing import Any, Optional

import numpy as np

from src.pomdp_core.model import TabularPomdp, model_violations
from src.pomdp_core.policy import Policy
from src.pomdp_core.trajectory import Dataset, trajectory_violations
from src.utils.errors import StructuralError
from src.utils.types import PolicyKind

MODEL_FIELDS = ("horizon", "state_counts", "action_count", "obs_counts", "initial_dist", "transitions", "emissions", "rewards")


def _read(path) -> str:
    path = Path(path)
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        logging.error(f"Failed to read {path}: {e}")
        raise


# Models


def model_to_document(model: TabularPomdp) -> dict[str, Any]:
    return {
        "name": model.name,
        "horizon": model.horizon,
        "state_counts": list(model.state_counts),
        "action_count": model.action_count,
        "obs_counts": list(model.obs_counts),
        "initial_dist": model.initial_dist.tolist(),
        "transitions": [t.tolist() for t in model.transitions],
        "emissions": [o.tolist() for o in model.emissions],
        "rewards": [r.tolist() for r in model.rewards],
    }


def model_document_violations(document: Any) -> list[str]:
    if not isinstance(document, dict):
        return ["model document must be a JSON object"]
    missing = [name for name in MODEL_FIELDS if name not in document]
    if missing:
        return [f"missing field '{name}'" for name in missing]
    try:
        return model_violations(
            int(document["horizon"]),
            [int(c) for c in document["state_counts"]],
            int(document["action_count"]),
            [int(c) for c in document["obs_counts"]],
            np.asarray(document["initial_dist"], dtype=np.float64),
            [np.asarray(t, dtype=np.float64) for t in document["transitions"]],
            [np.asarray(o, dtype=np.float64) for o in document["emissions"]],
            [np.asarray(r, dtype=np.float64) for r in document["rewards"]],
        )
    except (TypeError, ValueError) as e:
        return [f"malformed model arrays: {e}"]


def model_from_document(document: dict[str, Any]) -> TabularPomdp:
    violations = model_document_violations(document)
    if violations:
        raise StructuralError(violations)
    return TabularPomdp(
        horizon=document["horizon"],
        state_counts=document["state_counts"],
        action_count=document["action_count"],
        obs_counts=document["obs_counts"],
        initial_dist=document["initial_dist"],
        transitions=document["transitions"],
        emissions=document["emissions"],
        rewards=document["rewards"],
        name=document.get("name", ""),
    )


def dumps_model(model: TabularPomdp) -> str:
    return json.dumps(model_to_document(model), indent=1)


def load_model(path) -> TabularPomdp:
    model = model_from_document(json.loads(_read(path)))
    if not model.name:
        model = model.renamed(Path(path).stem)
    return model


# Policies


def policy_to_document(policy: Policy) -> dict[str, Any]:
    document: dict[str, Any] = {
        "kind": policy.kind.value,
        "policy_id": policy.policy_id,
        "horizon": policy.horizon,
        "action_count": policy.action_count,
    }
    if policy.kind == PolicyKind.MEMORYLESS:
        document["tables"] = [t.tolist() for t in policy.tables]
    elif policy.kind == PolicyKind.OPEN_LOOP:
        document["actions"] = list(policy.actions)
    else:
        document["default"] = policy.default.tolist()
        document["entries"] = [
            {"step": h, "history": key, "observation": o, "distribution": distribution.tolist()}
            for (h, key, o), distribution in sorted(policy.entries.items())
        ]
    return document


def policy_from_document(document: dict[str, Any]) -> Policy:
    try:
        kind = PolicyKind(document["kind"])
        if kind == PolicyKind.MEMORYLESS:
            return Policy.memoryless(document["tables"], policy_id=document.get("policy_id", ""))
        if kind == PolicyKind.OPEN_LOOP:
            return Policy.open_loop(document["actions"], int(document["action_count"]), policy_id=document.get("policy_id", ""))
        entries = {
            (int(e["step"]), str(e["history"]), int(e["observation"])): e["distribution"] for e in document["entries"]
        }
        return Policy.history_table(
            entries,
            document["default"],
            int(document["horizon"]),
            int(document["action_count"]),
            policy_id=document.get("policy_id", ""),
        )
    except StructuralError:
        raise
    except KeyError as e:
        raise StructuralError(f"policy document is missing field {e}")
    except (TypeError, ValueError, IndexError) as e:
        raise StructuralError(f"malformed policy document: {e}")


def dumps_policy(policy: Policy) -> str:
    return json.dumps(policy_to_document(policy), indent=1)


def load_policy(path) -> Policy:
    return policy_from_document(json.loads(_read(path)))


# Datasets


def dumps_dataset(dataset: Dataset) -> str:
    policy_id = "_".join(dataset.behavior_policy_id.split()) or "unknown"
    lines = [f"n={dataset.n} seed={dataset.seed} policy={policy_id}"]
    for o_row, a_row, r_row in zip(dataset.observations.tolist(), dataset.actions.tolist(), dataset.rewards.tolist()):
        lines.append(" ".join(f"{o} {a} {r!r}" for o, a, r in zip(o_row, a_row, r_row)))
    return "\n".join(lines) + "\n"


def loads_dataset(text: str, horizon: Optional[int] = None) -> Dataset:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise StructuralError("dataset is empty, the header line is missing")
    header = {}
    for token in lines[0].split():
        key, sep, value = token.partition("=")
        if not sep:
            raise StructuralError(f"malformed header token '{token}'")
        header[key] = value
    try:
        n, seed = int(header["n"]), int(header["seed"])
    except (KeyError, ValueError):
        raise StructuralError("header must read 'n=<int> seed=<int> policy=<id>'")
    body = lines[1:]
    if len(body) != n:
        raise StructuralError(f"header declares n={n}, found {len(body)} trajectories")

    rows = []
    for index, line in enumerate(body):
        tokens = line.split()
        if len(tokens) % 3:
            raise StructuralError(f"trajectory {index}: {len(tokens)} tokens is not a sequence of o a r triples")
        if horizon is None:
            horizon = len(tokens) // 3
        if len(tokens) != 3 * horizon:
            raise StructuralError(f"trajectory {index}: {len(tokens) // 3} steps, expected {horizon}")
        try:
            rows.append([(int(tokens[i]), int(tokens[i + 1]), float(tokens[i + 2])) for i in range(0, len(tokens), 3)])
        except ValueError as e:
            raise StructuralError(f"trajectory {index}: {e}")
    horizon = horizon or 0
    steps = np.array(rows, dtype=np.float64).reshape(n, horizon, 3)
    return Dataset(
        observations=steps[:, :, 0].astype(np.int64),
        actions=steps[:, :, 1].astype(np.int64),
        rewards=steps[:, :, 2],
        behavior_policy_id=header.get("policy", ""),
        seed=seed,
    )


def load_dataset(path, horizon: Optional[int] = None) -> Dataset:
    return loads_dataset(_read(path), horizon=horizon)


def dataset_violations(dataset: Dataset, model: TabularPomdp) -> list[str]:
    return trajectory_violations(model, dataset.observations, dataset.actions, dataset.rewards)
