from src.coverage.coefficients import (
    SigmaResult,
    compute_c_a,
    occupancy_ratio_bound,
    sigma_future,
    sigma_future_weighted,
    sigma_history,
    sigma_obs,
    sigma_obs_weighted,
)
from src.coverage.matrices import (
    FutureIndex,
    OutcomeMatrix,
    confusion_matrix,
    inverse_l1_norm,
    matrix_l1_norm,
    outcome_matrix,
    weighted_pseudo_inverse,
)
from src.coverage.prefilter import prefilter, prefilter_indices
from src.coverage.report import CoverageReport, coverage_report

__all__ = [
    "CoverageReport",
    "FutureIndex",
    "OutcomeMatrix",
    "SigmaResult",
    "compute_c_a",
    "confusion_matrix",
    "coverage_report",
    "inverse_l1_norm",
    "matrix_l1_norm",
    "occupancy_ratio_bound",
    "outcome_matrix",
    "prefilter",
    "prefilter_indices",
    "sigma_future",
    "sigma_future_weighted",
    "sigma_history",
    "sigma_obs",
    "sigma_obs_weighted",
    "weighted_pseudo_inverse",
]
