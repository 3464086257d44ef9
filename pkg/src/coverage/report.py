import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from src.coverage.coefficients import (
    behavior_prior,
    compute_c_a,
    history_sigmas,
    sigma_history,
    sigma_obs,
    sigma_obs_weighted,
)
from src.coverage.matrices import confusion_matrix, inverse_l1_norm, outcome_matrices
from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy
from src.utils.errors import PomdpOpeError
from src.utils.settings_manager import DEFAULT_SINGULAR_CUTOFF
from src.utils.types import ComputationMethod, CoverageMode


def _render(value: float):
    return "inf" if np.isinf(value) else float(value)


def _worst(per_step: dict[int, float]) -> Optional[float]:
    return max(per_step.values()) if per_step else None


@dataclass
class CoverageReport:
    """
    Every coverage and revealing coefficient of one (model, behavior policy) pair.

    Per-step dictionaries are keyed by the 1-based step h in [H-1]. A mode that could
    not be computed (e.g. outcome matrices under a history-dependent behavior policy)
    leaves its dictionary empty and records the reason in `errors`.
    """

    horizon: int
    c_a: float
    c_h: dict[int, float] = field(default_factory=dict)
    c_o: dict[int, float] = field(default_factory=dict)
    c_o_weighted: dict[int, float] = field(default_factory=dict)
    c_f: dict[int, float] = field(default_factory=dict)
    c_f_weighted: dict[int, float] = field(default_factory=dict)
    methods: dict[str, str] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)

    @property
    def max_c_h(self) -> Optional[float]:
        return _worst(self.c_h)

    @property
    def max_c_o(self) -> Optional[float]:
        return _worst(self.c_o)

    @property
    def max_c_f(self) -> Optional[float]:
        return _worst(self.c_f)

    def to_dict(self) -> dict:
        def per_step(values: dict[int, float]) -> dict[str, object]:
            return {str(h): _render(v) for h, v in sorted(values.items())}

        document = {
            "horizon": self.horizon,
            "cA": _render(self.c_a),
            "cH": per_step(self.c_h),
            "cO": per_step(self.c_o),
            "cOWeighted": per_step(self.c_o_weighted),
            "cF": per_step(self.c_f),
            "cFWeighted": per_step(self.c_f_weighted),
            "methods": dict(self.methods),
        }
        if self.errors:
            document["errors"] = dict(self.errors)
        return document


def _expand(modes: Iterable[CoverageMode]) -> set[CoverageMode]:
    modes = {CoverageMode(m) for m in modes}
    if CoverageMode.ALL in modes:
        return {CoverageMode.SINGLE, CoverageMode.MULTI, CoverageMode.WEIGHTED, CoverageMode.HISTORY}
    return modes


def coverage_report(
    model: TabularPomdp,
    behavior: Policy,
    modes: Iterable[CoverageMode] = (CoverageMode.ALL,),
    mc_samples: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    cap: Optional[int] = None,
    cutoff: float = DEFAULT_SINGULAR_CUTOFF,
) -> CoverageReport:
    """
    Assemble C_A and the requested per-step coefficients over h in [H-1].

    :param mc_samples: Estimate Sigma_{H,h} from this many sampled histories instead of enumerating
    :param cutoff: Relative singular-value cutoff below which a matrix counts as singular
    """
    modes = _expand(modes)
    steps = range(1, model.horizon)
    report = CoverageReport(horizon=model.horizon, c_a=compute_c_a(model, behavior, cap=cap))

    if CoverageMode.SINGLE in modes:
        report.c_o = {h: sigma_obs(model, h, cutoff).coefficient for h in steps}
        report.methods["cO"] = ComputationMethod.EXACT.value

    if CoverageMode.HISTORY in modes:
        if mc_samples:
            report.c_h = {h: sigma_history(model, behavior, h, mc_samples, rng, cap, cutoff).coefficient for h in steps}
            report.methods["cH"] = ComputationMethod.MONTE_CARLO.value
        else:
            report.c_h = {r.step: r.coefficient for r in history_sigmas(model, behavior, cap=cap, cutoff=cutoff)}
            report.methods["cH"] = ComputationMethod.EXACT.value

    if CoverageMode.WEIGHTED in modes:
        try:
            report.c_o_weighted = {
                h: sigma_obs_weighted(model, behavior, h, cap=cap, cutoff=cutoff).coefficient for h in steps
            }
            report.methods["cOWeighted"] = ComputationMethod.EXACT.value
        except PomdpOpeError as e:
            logging.warning(f"weighted single-step coverage unavailable: {e}")
            report.errors["cOWeighted"] = f"{type(e).__name__}: {e}"

    if (CoverageMode.MULTI in modes or CoverageMode.WEIGHTED in modes) and model.horizon > 1:
        try:
            for outcome in outcome_matrices(model, behavior, down_to=1, cap=cap):
                h = outcome.index.step
                if h == model.horizon:
                    continue
                if CoverageMode.MULTI in modes:
                    report.c_f[h] = inverse_l1_norm(confusion_matrix(outcome.matrix), cutoff)
                if CoverageMode.WEIGHTED in modes and "cOWeighted" not in report.errors:
                    prior = behavior_prior(model, behavior, h, cap=cap)
                    report.c_f_weighted[h] = inverse_l1_norm(confusion_matrix(outcome.matrix, prior), cutoff)
            if CoverageMode.MULTI in modes:
                report.methods["cF"] = ComputationMethod.EXACT.value
            if report.c_f_weighted:
                report.methods["cFWeighted"] = ComputationMethod.EXACT.value
        except PomdpOpeError as e:
            logging.warning(f"multi-step coverage unavailable: {e}")
            report.errors["cF"] = f"{type(e).__name__}: {e}"
            report.c_f, report.c_f_weighted = {}, {}

    logging.info(f"coverage of {behavior.policy_id} on {model.name or '<unnamed>'}: cA = {report.c_a}")
    return report
