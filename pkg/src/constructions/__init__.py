from src.constructions.bundle import HardnessBundle, verify_bundle
from src.constructions.hardness import branching_chain, history_recording_model, theorem3_instance, theorem6_instance
from src.constructions.mdp import mdp_embed, mdp_value_iteration
from src.constructions.random_models import (
    RandomPomdpSpec,
    mle_rate_bundle,
    mle_rate_model,
    perturb_model,
    random_pomdp,
)

__all__ = [
    "HardnessBundle",
    "RandomPomdpSpec",
    "branching_chain",
    "history_recording_model",
    "mdp_embed",
    "mdp_value_iteration",
    "mle_rate_bundle",
    "mle_rate_model",
    "perturb_model",
    "random_pomdp",
    "theorem3_instance",
    "theorem6_instance",
    "verify_bundle",
]
