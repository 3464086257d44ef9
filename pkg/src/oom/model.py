from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.coverage.matrices import FutureIndex
from src.pomdp_core.enumeration import check_capacity
from src.utils.errors import ParameterError
from src.utils.types import PseudoInverseWeighting, RevealingMode


def _frozen(array) -> np.ndarray:
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class OomModel:
    """
    Observable-operator parameterization of a tabular POMDP.

    The operator B_h(o, a) = U_{h+1} T_{h,a} diag(O_h(o|.)) U_h^dagger is kept in factored form:

    - outcome_matrices[h-1] = U_h (the emission O_h in single mode, U_{F,h} in multi mode)
    - cores[h-1][o, a] = T_{h,a} diag(O_h(o|.)), shape (|O_h|, A, |S_{h+1}|, |S_h|)
    - pseudo_inverses[h-1] = U_h^dagger, the weighted left inverse of U_h

    Vectors b(tau_{h-1}) live in the row space of U_h, i.e. over O_h (single) or F_h (multi).
    """

    mode: RevealingMode
    weighting: PseudoInverseWeighting
    b0: np.ndarray
    outcome_matrices: tuple[np.ndarray, ...]
    cores: tuple[np.ndarray, ...]
    pseudo_inverses: tuple[np.ndarray, ...]
    coefficients: tuple[float, ...]  # ||Sigma_h^{-1}||_1 for h in [H-1]
    future_indices: tuple[FutureIndex, ...]
    action_count: int
    behavior_policy_id: str = ""
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "mode", RevealingMode(self.mode))
        object.__setattr__(self, "weighting", PseudoInverseWeighting(self.weighting))
        object.__setattr__(self, "b0", _frozen(self.b0))
        for attribute in ("outcome_matrices", "cores", "pseudo_inverses"):
            object.__setattr__(self, attribute, tuple(_frozen(m) for m in getattr(self, attribute)))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    @property
    def horizon(self) -> int:
        return len(self.outcome_matrices)

    @property
    def obs_counts(self) -> tuple[int, ...]:
        return tuple(index.shape[0] for index in self.future_indices)

    def dimension(self, h: int) -> int:
        """Length of b(tau_{h-1}), i.e. the number of rows of U_h."""
        return self.outcome_matrices[h - 1].shape[0]

    def operator(self, h: int, o: int, a: int, cap: Optional[int] = None) -> np.ndarray:
        """Dense B_h(o, a) of shape (dim_{h+1}, dim_h)."""
        if not 1 <= h <= self.horizon - 1:
            raise ParameterError(f"operators exist for h in [1, {self.horizon - 1}], got {h}")
        check_capacity(self.dimension(h + 1) * self.dimension(h), cap, what=f"dense operator B_{h}")
        return self.outcome_matrices[h] @ self.cores[h - 1][o, a] @ self.pseudo_inverses[h - 1]

    def apply(self, h: int, vectors: np.ndarray, observations: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """
        Row-wise B_h(o_i, a_i) v_i.

        :param vectors: (N, dim_h)
        :param observations: (N,) observations o_h
        :param actions: (N,) actions a_h
        :return: (N, dim_{h+1})
        """
        latent = vectors @ self.pseudo_inverses[h - 1].T
        moved = np.einsum("nts,ns->nt", self.cores[h - 1][observations, actions], latent)
        return moved @ self.outcome_matrices[h].T

    def branch(self, h: int, vectors: np.ndarray) -> np.ndarray:
        """B_h(o, a) v for every (o, a); returns (N * |O_h| * A, dim_{h+1}) in (row, o, a) order."""
        latent = vectors @ self.pseudo_inverses[h - 1].T
        moved = np.einsum("oats,ns->noat", self.cores[h - 1], latent)
        return moved.reshape(-1, moved.shape[-1]) @ self.outcome_matrices[h].T

    def observation_marginal(self, h: int, vectors: np.ndarray) -> np.ndarray:
        """
        Fold b(tau_{h-1}) onto o_h: (N, dim_h) -> (N, |O_h|).

        Single-mode rows already are observations; multi-mode rows are futures
        starting with o_h, and summing the rest leaves P(tau_{h-1}, o_h).
        """
        if self.mode == RevealingMode.SINGLE:
            return vectors
        return vectors.reshape(vectors.shape[0], self.obs_counts[h - 1], -1).sum(axis=2)

    def environment_probs(
        self,
        observations: np.ndarray,
        actions: np.ndarray,
        steps: Optional[int] = None,
    ) -> np.ndarray:
        """P_M(o_1, ..., o_steps | a_1, ...) for a batch of histories, computed from the operators only."""
        steps = self.horizon if steps is None else steps
        observations = np.asarray(observations, dtype=np.int64)
        actions = np.asarray(actions, dtype=np.int64)
        n = observations.shape[0]
        if steps == 0:
            return np.ones(n)
        vectors = np.tile(self.b0, (n, 1))
        for h in range(1, steps):
            vectors = self.apply(h, vectors, observations[:, h - 1], actions[:, h - 1])
        marginal = self.observation_marginal(steps, vectors)
        return marginal[np.arange(n), observations[:, steps - 1]]
