from src.estimators.effective_coverage import EffectiveCoverage, c_eff_multi, c_eff_single
from src.estimators.fdvf import fdvf_construct
from src.estimators.likelihood import eps_approx, log_likelihood, mle_select, trajectory_log_likelihoods
from src.estimators.model_class import ModelClass, OpeResult
from src.estimators.ope import Transcript, importance_sampling_ope, model_based_ope, restricted_policy_oracle

__all__ = [
    "EffectiveCoverage",
    "ModelClass",
    "OpeResult",
    "Transcript",
    "c_eff_multi",
    "c_eff_single",
    "eps_approx",
    "fdvf_construct",
    "importance_sampling_ope",
    "log_likelihood",
    "mle_select",
    "model_based_ope",
    "restricted_policy_oracle",
    "trajectory_log_likelihoods",
]
