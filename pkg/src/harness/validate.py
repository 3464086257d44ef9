import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from src.pomdp_core.io import (
    dataset_violations,
    loads_dataset,
    model_document_violations,
    model_from_document,
    policy_from_document,
)
from src.pomdp_core.model import TabularPomdp
from src.utils.errors import StructuralError


@dataclass
class FileReport:
    path: str
    kind: str
    violations: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"path": self.path, "kind": self.kind, "valid": self.valid, "violations": list(self.violations)}


@dataclass
class ValidationReport:
    files: list[FileReport] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return all(f.valid for f in self.files)

    def to_dict(self) -> dict:
        return {"valid": self.valid, "files": [f.to_dict() for f in self.files]}


def _classify(path: Path, text: str):
    """(kind, parsed JSON document or None)."""
    if path.suffix != ".json":
        return "dataset", None
    document = json.loads(text)
    if isinstance(document, dict) and "transitions" in document:
        return "model", document
    if isinstance(document, dict) and "kind" in document:
        return "policy", document
    if isinstance(document, dict) and ("values" in document or "coefficients" in document):
        return "expected", document
    return "unknown", document


def validate_files(paths: Sequence, model: Optional[TabularPomdp] = None) -> ValidationReport:
    """
    Check model, policy and dataset files against their structural invariants.

    Policies and datasets are also checked against `model`, or else against the first
    valid model among `paths`. Read errors are reported per file.
    """
    report = ValidationReport()
    pending = []
    for raw in paths:
        path = Path(raw)
        try:
            text = path.read_text(encoding="utf-8")
            kind, document = _classify(path, text)
        except OSError as e:
            logging.error(f"Failed to read {path}: {e}")
            report.files.append(FileReport(str(path), "unreadable", [f"{type(e).__name__}: {e}"]))
            continue
        except json.JSONDecodeError as e:
            report.files.append(FileReport(str(path), "unknown", [f"invalid JSON: {e}"]))
            continue
        entry = FileReport(str(path), kind)
        report.files.append(entry)
        if kind == "model":
            entry.violations.extend(model_document_violations(document))
            if entry.valid and model is None:
                model = model_from_document(document)
        elif kind == "unknown":
            entry.violations.append("not a model, policy, dataset or expected-values document")
        elif kind != "expected":
            pending.append((entry, document, text))

    for entry, document, text in pending:
        try:
            if entry.kind == "policy":
                policy = policy_from_document(document)
                if model is not None:
                    policy.check_compatible(model)
            else:
                dataset = loads_dataset(text)
                if model is not None:
                    entry.violations.extend(dataset_violations(dataset, model))
        except StructuralError as e:
            entry.violations.extend(e.violations)

    for entry in report.files:
        if not entry.valid:
            logging.warning(f"{entry.path} ({entry.kind}): {len(entry.violations)} violations")
    return report
