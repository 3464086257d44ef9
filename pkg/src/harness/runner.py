import json
import logging
from dataclasses import dataclass
from functools import partial
from typing import Any, Optional

import numpy as np
import pandas as pd

from src.harness.config import ExperimentConfig
from src.harness.experiments import EXPERIMENTS, ROW_COLUMNS, SORT_KEYS, failed_job_rows
from src.utils.errors import ParameterError
from src.utils.file_storage import FileStorage
from src.utils.threads.experiment_thread_manager import ExperimentThreadManager

GROUP_KEYS = ["experiment", "policy", "method", "horizon", "n"]
QUANTILES = {"q05": 0.05, "q95": 0.95}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    table: pd.DataFrame
    summary: dict[str, Any]

    def to_csv(self) -> str:
        return self.table.to_csv(index=False, lineterminator="\n")

    def summary_json(self) -> str:
        return json.dumps(self.summary, indent=1, sort_keys=True)


def _statistics(values: pd.Series) -> dict[str, Optional[float]]:
    values = pd.to_numeric(values, errors="coerce").dropna()
    if values.empty:
        return {"mean": None, "median": None, "q05": None, "q95": None, "std": None}
    statistics = {"mean": float(values.mean()), "median": float(values.median())}
    statistics.update({name: float(values.quantile(q)) for name, q in QUANTILES.items()})
    statistics["std"] = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return statistics


def summarize(table: pd.DataFrame) -> dict[str, Any]:
    """Per (experiment, policy, method, horizon, n): counts, estimate and absError statistics."""
    groups = []
    for keys, group in table.groupby(GROUP_KEYS, sort=True, dropna=False):
        entry = dict(zip(GROUP_KEYS, (k.item() if isinstance(k, np.generic) else k for k in keys)))
        entry["count"] = int(len(group))
        entry["errors"] = int(group["error"].notna().sum())
        entry["estimate"] = _statistics(group["estimate"])
        entry["absError"] = _statistics(group["absError"])
        transcripts = group["transcriptsEqual"].dropna()
        if not transcripts.empty:
            entry["equalTranscriptFraction"] = float(transcripts.astype(bool).mean())
        groups.append(entry)
    return {"rows": int(len(table)), "errors": int(table["error"].notna().sum()), "groups": groups}


def run_experiment(config: ExperimentConfig, storage: Optional[FileStorage] = None) -> ExperimentResult:
    """
    Run every (horizon, n, seed) cell of a registered sweep.

    Rows are sorted by (experiment, horizon, n, seed, policy, method), so the CSV does
    not depend on the number of workers. With `storage`, writes `<name>.csv` and
    `<name>.summary.json`.
    """
    if config.name not in EXPERIMENTS:
        raise ParameterError(f"unknown experiment '{config.name}', known: {sorted(EXPERIMENTS)}")
    handler = EXPERIMENTS[config.name]
    jobs = [
        partial(handler, config, horizon, n, seed)
        for horizon in config.horizons
        for n in config.sample_sizes
        for seed in config.seeds
    ]
    logging.info(f"Experiment {config.name}: {len(jobs)} cells on {config.workers} workers")
    manager = ExperimentThreadManager(config.workers, on_failure=lambda job, error: failed_job_rows(*job.args, error))
    rows = manager.run_all(jobs)

    table = pd.DataFrame(rows, columns=list(ROW_COLUMNS))
    table = table.sort_values(SORT_KEYS, kind="mergesort").reset_index(drop=True)
    result = ExperimentResult(config=config, table=table, summary={"config": config.to_dict(), **summarize(table)})
    logging.info(f"Experiment {config.name} finished: {len(table)} rows, {result.summary['errors']} errors")

    if storage is not None:
        storage.save_text(f"{config.name}.csv", result.to_csv())
        storage.save_text(f"{config.name}.summary.json", result.summary_json())
    return result
