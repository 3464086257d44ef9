"""Confusion matrices, weighted pseudo-inverses and outcome matrices of futures."""

import logging
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from src.pomdp_core.enumeration import check_capacity
from src.pomdp_core.model import TabularPomdp
from src.pomdp_core.policy import Policy
from src.utils.errors import ParameterError, UnsupportedPolicyError
from src.utils.linalg import is_singular, solve
from src.utils.settings_manager import DEFAULT_SINGULAR_CUTOFF


def matrix_l1_norm(matrix: np.ndarray) -> float:
    """Induced 1-norm sup ||Mx||_1 / ||x||_1, i.e. the maximum absolute column sum."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if matrix.size == 0:
        raise ParameterError("the 1-norm of an empty matrix is undefined")
    return float(np.abs(matrix).sum(axis=0).max())


def inverse_l1_norm(matrix: np.ndarray, cutoff: float = DEFAULT_SINGULAR_CUTOFF) -> float:
    """||M^{-1}||_1, infinite when M is singular under the cutoff."""
    if is_singular(matrix, cutoff):
        return float("inf")
    return matrix_l1_norm(solve(matrix, np.eye(matrix.shape[0])))


def _row_weights(outcome: np.ndarray, prior: Optional[np.ndarray]) -> np.ndarray:
    return outcome.sum(axis=1) if prior is None else outcome @ prior


def confusion_matrix(outcome: np.ndarray, prior: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Sigma = U^T D^{-1} U with D = diag(U 1), or diag(p) U^T diag(U p)^{-1} U when a prior is given.

    Rows of U with zero weight are dropped before D is inverted. Columns of the
    result sum to 1: entry (i, j) is the chance of decoding state i from an
    outcome generated by state j.
    """
    outcome = np.asarray(outcome, dtype=np.float64)
    weights = _row_weights(outcome, prior)
    keep = weights > 0
    kept = outcome[keep]
    sigma = kept.T @ (kept / weights[keep][:, None])
    if prior is not None:
        sigma = np.asarray(prior)[:, None] * sigma
    return sigma


def weighted_pseudo_inverse(
    outcome: np.ndarray,
    sigma: np.ndarray,
    prior: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Left inverse Sigma^{-1} U^T D^{-1} (or Sigma^{-1} diag(p) U^T D_p^{-1}) of an outcome matrix.

    Dropped rows get zero columns. The solve goes through a pivoted LU factorization.
    """
    outcome = np.asarray(outcome, dtype=np.float64)
    weights = _row_weights(outcome, prior)
    keep = weights > 0
    rhs = np.zeros((outcome.shape[1], outcome.shape[0]))
    rhs[:, keep] = (outcome[keep] / weights[keep][:, None]).T
    if prior is not None:
        rhs = np.asarray(prior)[:, None] * rhs
    return solve(sigma, rhs)


@dataclass(frozen=True)
class FutureIndex:
    """
    Bijection between futures f_h = (o_h, a_h, ..., o_{H-1}, a_{H-1}, o_H) and row indices.

    Rows follow lexicographic (o, a, ...) order, so `shape` is (|O_h|, A, ..., |O_H|).
    """

    step: int
    shape: tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def future(self, row: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(row, self.shape))

    def row(self, future) -> int:
        return int(np.ravel_multi_index(tuple(future), self.shape))

    def observations(self) -> np.ndarray:
        """(size, H - h + 1) matrix of the observations of every future."""
        digits = np.unravel_index(np.arange(self.size), self.shape)
        return np.stack(digits[0::2], axis=1)

    def future_returns(self, model: TabularPomdp) -> np.ndarray:
        """R+(f_h): sum of the rewards of the observations in each future."""
        observations = self.observations()
        total = np.zeros(self.size)
        for j, k in enumerate(range(self.step - 1, model.horizon)):
            total += model.rewards[k][observations[:, j]]
        return total


@dataclass(frozen=True)
class OutcomeMatrix:
    matrix: np.ndarray  # (|F_h|, |S_h|), entry (f, s) = P^{pi_b}(f_h = f | s_h = s)
    index: FutureIndex


def future_shape(model: TabularPomdp, h: int) -> tuple[int, ...]:
    shape = []
    for k in range(h - 1, model.horizon - 1):
        shape.extend([model.obs_counts[k], model.action_count])
    shape.append(model.obs_counts[-1])
    return tuple(shape)


def outcome_matrices(
    model: TabularPomdp,
    policy: Policy,
    down_to: int = 1,
    cap: Optional[int] = None,
) -> Iterator[OutcomeMatrix]:
    """
    Yield U_{F,H}, U_{F,H-1}, ..., U_{F,down_to} by one backward sweep.

    U_{F,k} = sum over (o, a) of O_k(o|.) pi(a|o) times U_{F,k+1} T_{k,a}, stacked in (o, a, f') order.
    """
    if not policy.is_memoryless:
        raise UnsupportedPolicyError(
            f"P(f_h | s_h) under {policy.policy_id} is ill-posed: the behavior policy depends on the history"
        )
    if not 1 <= down_to <= model.horizon:
        raise ParameterError(f"step must lie in [1, {model.horizon}], got {down_to}")
    policy.check_compatible(model)
    check_capacity(int(np.prod(future_shape(model, down_to))), cap, what=f"futures from step {down_to}",
                   width=model.state_counts[down_to - 1])
    outcome = np.asarray(model.emissions[-1], dtype=np.float64)
    yield OutcomeMatrix(outcome, FutureIndex(model.horizon, future_shape(model, model.horizon)))
    for k in range(model.horizon - 2, down_to - 2, -1):
        emission = model.emissions[k]
        table = policy.memoryless_table(k + 1, model.obs_counts[k])
        continued = np.einsum("ft,ats->afs", outcome, model.transitions[k])
        outcome = np.einsum("os,oa,afs->oafs", emission, table, continued).reshape(-1, model.state_counts[k])
        logging.debug(f"outcome matrix at step {k + 1}: {outcome.shape}")
        yield OutcomeMatrix(outcome, FutureIndex(k + 1, future_shape(model, k + 1)))


def outcome_matrix(model: TabularPomdp, policy: Policy, h: int, cap: Optional[int] = None) -> OutcomeMatrix:
    """U_{F,h}: rows are futures in lexicographic order, each column sums to 1."""
    *_, result = outcome_matrices(model, policy, down_to=h, cap=cap)
    return result
