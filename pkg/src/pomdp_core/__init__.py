from src.pomdp_core.inference import (
    BeliefVector,
    TrajectoryProbability,
    belief_state,
    latent_occupancy,
    latent_value,
    policy_value,
    state_marginals,
    trajectory_prob,
)
from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy, encode_history
from src.pomdp_core.simulate import estimate_policy_value, sample_dataset, sample_trajectory
from src.pomdp_core.trajectory import Dataset, History, Trajectory

__all__ = [
    "BeliefVector",
    "Dataset",
    "History",
    "Policy",
    "TabularPomdp",
    "Trajectory",
    "TrajectoryProbability",
    "belief_state",
    "encode_history",
    "estimate_policy_value",
    "latent_occupancy",
    "latent_value",
    "policy_value",
    "sample_dataset",
    "sample_trajectory",
    "state_marginals",
    "trajectory_prob",
]
