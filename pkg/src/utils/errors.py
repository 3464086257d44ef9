from typing import Iterable, Optional


class PomdpOpeError(Exception):
    """Base class for every error raised by the library. `exit_code` is what the CLI returns."""

    exit_code = 1


class StructuralError(PomdpOpeError, ValueError):
    """
    A model, policy, trajectory or dataset violates a structural invariant.

    :param violations: Human readable violations, each naming its coordinates
    """

    def __init__(self, violations: Iterable[str] | str):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ParameterError(PomdpOpeError, ValueError):
    pass


class CapacityError(PomdpOpeError):
    exit_code = 2

    def __init__(self, required: int, cap: int, what: str = "enumeration"):
        self.required = int(required)
        self.cap = int(cap)
        super().__init__(f"{what} needs {self.required} entries, cap is {self.cap}")


class ZeroProbabilityHistoryError(PomdpOpeError):
    pass


class UnsupportedPolicyError(PomdpOpeError):
    pass


class RevealingViolationError(PomdpOpeError):
    def __init__(self, step: int, message: Optional[str] = None):
        self.step = step
        super().__init__(message or f"revealing matrix is singular at step {step}")


class DegeneratePriorError(PomdpOpeError):
    pass


class DegenerateWeightError(PomdpOpeError):
    pass


class ZeroLikelihoodError(PomdpOpeError):
    def __init__(self, trajectory_index: int, model_name: str = ""):
        self.trajectory_index = int(trajectory_index)
        where = f" under {model_name}" if model_name else ""
        super().__init__(f"trajectory {self.trajectory_index} has zero likelihood{where}")


class EmptyModelClassError(PomdpOpeError):
    exit_code = 3


class ZeroBehaviorProbabilityError(PomdpOpeError, ZeroDivisionError):
    pass


class GenerationError(PomdpOpeError):
    pass


class OomConstructionError(PomdpOpeError):
    def __init__(self, residual: float, message: Optional[str] = None):
        self.residual = float(residual)
        super().__init__(message or f"operator reconstruction residual {self.residual:.3e} exceeds tolerance")


class CoefficientInvariantError(PomdpOpeError):
    pass
