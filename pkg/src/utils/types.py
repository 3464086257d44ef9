from enum import Enum


class PolicyKind(str, Enum):
    MEMORYLESS = "memoryless"  # pi_h(a | o_h)
    OPEN_LOOP = "open_loop"  # fixed action per step
    HISTORY_TABLE = "history_table"  # (h, tau_{h-1}, o_h) -> distribution


class RevealingMode(str, Enum):
    SINGLE = "single"  # single-step, emission matrices
    MULTI = "multi"  # multi-step, outcome matrices of futures


class PseudoInverseWeighting(str, Enum):
    UNIFORM = "uniform"  # Sigma^{-1} M^T D^{-1}
    OCCUPANCY = "occupancy"  # prior weighted by the behavior occupancy p_h


class ComputationMethod(str, Enum):
    EXACT = "exact"
    MONTE_CARLO = "monte_carlo"


class OpeMethod(str, Enum):
    MODEL_BASED_MLE = "model-based-mle"
    IMPORTANCE_SAMPLING = "importance-sampling"
    TRUE_VALUE = "true-value"
    RESTRICTED_ORACLE = "restricted-oracle"


class GenerationRevealing(str, Enum):
    NONE = "none"
    SINGLE = "single"
    MULTI = "multi"


class CoverageMode(str, Enum):
    SINGLE = "single"  # c_o
    MULTI = "multi"  # c_f
    WEIGHTED = "weighted"  # occupancy-weighted c_o and c_f
    HISTORY = "history"  # c_h
    ALL = "all"
