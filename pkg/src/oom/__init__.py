from src.oom.build import build_oom
from src.oom.checks import (
    OomCheckReport,
    belief_relation_residual,
    oom_check,
    oom_trajectory_prob,
    operator_contraction_check,
)
from src.oom.model import OomModel

__all__ = [
    "OomCheckReport",
    "OomModel",
    "belief_relation_residual",
    "build_oom",
    "oom_check",
    "oom_trajectory_prob",
    "operator_contraction_check",
]
