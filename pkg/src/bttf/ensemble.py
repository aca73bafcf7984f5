"""Step-wise top-K ensembling and label-free selection of K.

Candidate sizes are ``M, 2M, ...`` (plus ``N`` itself). For each candidate
the spread of the top-K member predictions is summarised by

* V(K): population variance across members, per (window, step) cell,
  averaged over cells;
* R(K): mean pairwise Pearson correlation of the members' flattened
  predictions;

and the two are min-max normalised over the grid and summed into S(K). The
chosen size is the smallest K minimising S.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError

DEFAULT_EPS = 1e-8


@dataclass(frozen=True)
class KGrid:
    M: int
    N: int
    candidates: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise ParameterError(f"step M and pool size N must be >= 1, got M={self.M}, N={self.N}")
        ks = list(range(self.M, self.N + 1, self.M))
        if not ks or ks[-1] != self.N:
            ks.append(self.N)
        object.__setattr__(self, "candidates", tuple(ks))

    def __iter__(self):
        return iter(self.candidates)

    def __len__(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class EnsembleStats:
    K: int
    V: float
    R: float
    S: float = 0.0

    def to_dict(self, chosen: bool = False) -> dict:
        return {"K": self.K, "V": self.V, "R": self.R, "S": self.S, "chosen": chosen}


def _check_tensor(ranked_preds) -> np.ndarray:
    P = np.asarray(ranked_preds, dtype=np.float64)
    if P.ndim < 2:
        raise ShapeError("ranked prediction tensor", "(N, n_windows, H)", P.shape)
    return P


def _check_k(K: int, N: int) -> None:
    if not 1 <= K <= N:
        raise ParameterError(f"K must lie in [1, {N}], got {K}")


def topk_average(ranked_preds, K: int) -> np.ndarray:
    P = _check_tensor(ranked_preds)
    _check_k(K, P.shape[0])
    return P[:K].mean(axis=0)


def variance_stat(ranked_preds, K: int) -> float:
    P = _check_tensor(ranked_preds)
    _check_k(K, P.shape[0])
    # shift by the top member: same variance, exact zero for identical members
    return float(np.var(P[:K] - P[0], axis=0).mean())


def correlation_matrix(ranked_preds) -> np.ndarray:
    """Pearson correlation between flattened members; 0 wherever a member is constant."""
    P = _check_tensor(ranked_preds)
    Z = P.reshape(P.shape[0], -1)
    Z = Z - Z.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", Z, Z))
    live = norms > 0
    C = np.zeros((len(Z), len(Z)))
    Zl = Z[live] / norms[live, None]
    C[np.ix_(live, live)] = np.clip(Zl @ Zl.T, -1.0, 1.0)
    return C


def _mean_upper(C: np.ndarray, K: int) -> float:
    if K < 2:
        return 1.0
    iu = np.triu_indices(K, k=1)
    return float(C[:K, :K][iu].mean())


def meancorr_stat(ranked_preds, K: int) -> float:
    P = _check_tensor(ranked_preds)
    _check_k(K, P.shape[0])
    if K < 2:
        return 1.0
    return _mean_upper(correlation_matrix(P[:K]), K)


def score(V, R, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Min-max normalised ``V`` plus min-max normalised ``R`` over the grid."""
    V = np.asarray(V, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    if V.size == 0 or V.shape != R.shape:
        raise ParameterError("score needs equal-length, non-empty V and R")
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    return ((V - V.min()) / (V.max() - V.min() + eps)
            + (R - R.min()) / (R.max() - R.min() + eps))


@dataclass(frozen=True)
class Selection:
    K: int
    stats: tuple[EnsembleStats, ...]
    final: np.ndarray

    def rows(self) -> list[dict]:
        return [s.to_dict(chosen=s.K == self.K) for s in self.stats]


def select_k(ranked_preds, grid, eps: float = DEFAULT_EPS) -> Selection:
    """Evaluate V, R and S on every candidate; pick the smallest argmin of S."""
    P = _check_tensor(ranked_preds)
    ks = list(grid)
    if not ks:
        raise ParameterError("empty candidate grid")
    for K in ks:
        _check_k(K, P.shape[0])
    C = correlation_matrix(P[:max(ks)])
    V = [variance_stat(P, K) for K in ks]
    R = [_mean_upper(C, K) for K in ks]
    S = score(V, R, eps)
    best = int(np.argmin(S))  # first occurrence = smallest K
    stats = tuple(EnsembleStats(K, v, r, float(s)) for K, v, r, s in zip(ks, V, R, S))
    return Selection(ks[best], stats, topk_average(P, ks[best]))


@dataclass(frozen=True)
class ErrorDecomposition:
    """Empirical bias/variance/covariance split of a top-K ensemble's MSE.

    Member errors are centred on the ensemble bias (the mean error over all
    members and cells). ``mean_variance`` and ``mean_covariance`` are the
    average member variance and average pairwise covariance. The terms
    ``bias_sq + variance_term + covariance_term`` reproduce the measured
    ensemble MSE exactly; ``residual`` holds whatever floating-point
    difference (or, on noisy labels, irreducible part) remains.
    """

    K: int
    bias_sq: float
    mean_variance: float
    mean_covariance: float
    variance_term: float
    covariance_term: float
    residual: float
    measured_mse: float
    covariance_defined: bool

    @property
    def total(self) -> float:
        return self.bias_sq + self.variance_term + self.covariance_term + self.residual


def decompose_error(ranked_preds, targets, K: int | None = None) -> ErrorDecomposition:
    """Split the top-K ensemble MSE against ground truth into its parts.

    With ``K < 2`` there are no member pairs: the covariance term is 0 and
    ``covariance_defined`` is False.
    """
    P = _check_tensor(ranked_preds)
    K = P.shape[0] if K is None else K
    _check_k(K, P.shape[0])
    Y = np.asarray(targets, dtype=np.float64)
    if Y.shape != P.shape[1:]:
        raise ShapeError("targets", P.shape[1:], Y.shape)
    E = (P[:K] - Y).reshape(K, -1)  # member errors
    bias = float(E.mean())
    D = E - bias
    second = D @ D.T / D.shape[1]  # centred second-moment matrix
    mean_var = float(np.trace(second) / K)
    measured = float(np.mean((E.mean(axis=0)) ** 2))
    if K >= 2:
        iu = np.triu_indices(K, k=1)
        mean_cov = float(second[iu].mean())
        cov_term = (1.0 - 1.0 / K) * mean_cov
    else:
        mean_cov, cov_term = 0.0, 0.0
    var_term = mean_var / K
    modeled = bias * bias + var_term + cov_term
    return ErrorDecomposition(
        K=K,
        bias_sq=bias * bias,
        mean_variance=mean_var,
        mean_covariance=mean_cov,
        variance_term=var_term,
        covariance_term=cov_term,
        residual=measured - modeled,
        measured_mse=measured,
        covariance_defined=K >= 2,
    )
