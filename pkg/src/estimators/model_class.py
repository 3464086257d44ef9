from dataclasses import dataclass, field
from typing import Any, Iterator, Optional, Sequence

from src.pomdp_core.model import TabularPomdp
from src.utils.errors import ParameterError, StructuralError
from src.utils.types import OpeMethod


@dataclass(frozen=True)
class ModelClass:
    """
    Ordered, finite candidate class M.

    Members share the horizon, the action count and the per-step observation counts;
    state spaces may differ. `true_index` marks M* when it is a member.
    """

    models: tuple[TabularPomdp, ...]
    true_index: Optional[int] = None

    def __post_init__(self):
        models = tuple(self.models)
        object.__setattr__(self, "models", models)
        violations = [
            f"model {i} ({m.name or '<unnamed>'}) disagrees with model 0 on horizon, actions or observation counts"
            for i, m in enumerate(models[1:], start=1)
            if not m.shares_observables_with(models[0])
        ]
        if violations:
            raise StructuralError(violations)
        if self.true_index is not None and not 0 <= self.true_index < len(models):
            raise ParameterError(f"true index {self.true_index} outside a class of {len(models)} models")

    def __len__(self) -> int:
        return len(self.models)

    def __iter__(self) -> Iterator[TabularPomdp]:
        return iter(self.models)

    def __getitem__(self, index: int) -> TabularPomdp:
        return self.models[index]

    @property
    def true_model(self) -> Optional[TabularPomdp]:
        return None if self.true_index is None else self.models[self.true_index]

    def subset(self, indices: Sequence[int]) -> "ModelClass":
        """Members at `indices`, in that order; M* stays marked if it survives."""
        indices = list(indices)
        true_index = indices.index(self.true_index) if self.true_index in indices else None
        return ModelClass(tuple(self.models[i] for i in indices), true_index)


@dataclass
class OpeResult:
    estimate: float
    method: OpeMethod
    selected_model_index: Optional[int] = None
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "estimate": self.estimate,
            "method": OpeMethod(self.method).value,
            "selectedModelIndex": self.selected_model_index,
            "diagnostics": self.diagnostics,
        }
