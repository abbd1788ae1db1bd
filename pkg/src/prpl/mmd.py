"""Multi-RBF-kernel MMD estimator, its gradient, and distance diagnostics.

The kernel is the mean of m RBF kernels,
``kappa(x, y) = (1/m) * sum_i exp(-||x - y||^2 / (2 sigma_i^2))``,
and the squared MMD is the biased V-statistic (self-pairs included):
``(1/na^2) sum kappa(a_i, a_j) + (1/nb^2) sum kappa(b_i, b_j)
- (2/(na nb)) sum kappa(a_i, b_j)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import (
    DegenerateDataError,
    DimensionMismatchError,
    NoSharedClassesError,
    ValidationError,
)
from .feature_store import FeatureSet

DEFAULT_MULTIPLIERS = (0.25, 0.5, 1.0, 2.0, 4.0)
MEDIAN_SUBSAMPLE = 1000


@dataclass(frozen=True)
class KernelBank:
    """The RBF bandwidths whose mean defines the training kernel."""

    bandwidths: tuple[float, ...]

    def __post_init__(self):
        if len(self.bandwidths) < 1:
            raise ValidationError("kernel bank needs at least one bandwidth")
        if any(not np.isfinite(s) or s <= 0 for s in self.bandwidths):
            raise ValidationError(f"bandwidths must be positive: {self.bandwidths}")


def median_heuristic(
    data: np.ndarray, multipliers: Sequence[float] = DEFAULT_MULTIPLIERS
) -> KernelBank:
    """Bandwidths = multipliers x median pairwise Euclidean distance.

    The median is taken over a deterministic subsample of at most
    ``MEDIAN_SUBSAMPLE`` rows (evenly spaced indices), so the bank is a pure
    function of the data. A zero median (all sampled rows identical) is an
    error: no length scale can be derived.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValidationError("median heuristic needs a 2-D array with n >= 2")
    if not multipliers:
        raise ValidationError("need at least one bandwidth multiplier")
    n = data.shape[0]
    if n > MEDIAN_SUBSAMPLE:
        idx = np.unique(np.linspace(0, n - 1, MEDIAN_SUBSAMPLE).astype(np.int64))
        data = data[idx]
    med = float(np.median(pdist(data)))
    if med <= 0.0:
        raise DegenerateDataError("zero median pairwise distance")
    return KernelBank(tuple(float(m) * med for m in multipliers))


def kappa(x: np.ndarray, y: np.ndarray, bank: KernelBank) -> float:
    """Mean-of-RBF kernel value for a single pair of vectors, in (0, 1]."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DimensionMismatchError(f"kappa dims differ: {x.shape} vs {y.shape}")
    sq = float(np.dot(x - y, x - y))
    vals = [np.exp(-sq / (2.0 * s * s)) for s in bank.bandwidths]
    return float(np.mean(vals))


def _as_2d_f64(name: str, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DimensionMismatchError(f"{name} must be a non-empty 2-D array")
    return X


def _kernel_matrix(A: np.ndarray, B: np.ndarray, bank: KernelBank) -> np.ndarray:
    sq = cdist(A, B, "sqeuclidean")
    acc = np.zeros_like(sq)
    for s in bank.bandwidths:
        acc += np.exp(-sq / (2.0 * s * s))
    return acc / len(bank.bandwidths)


def mmd2(A: np.ndarray, B: np.ndarray, bank: KernelBank) -> float:
    """Biased (V-statistic) squared MMD between samples A (na x q) and B (nb x q)."""
    A = _as_2d_f64("A", A)
    B = _as_2d_f64("B", B)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatchError(
            f"A has q={A.shape[1]} but B has q={B.shape[1]}"
        )
    return float(
        _kernel_matrix(A, A, bank).mean()
        + _kernel_matrix(B, B, bank).mean()
        - 2.0 * _kernel_matrix(A, B, bank).mean()
    )


def grad_mmd2_wrt_A(A: np.ndarray, B: np.ndarray, bank: KernelBank) -> np.ndarray:
    """Analytic gradient of ``mmd2(A, B, bank)`` with respect to A (na x q)."""
    A = _as_2d_f64("A", A)
    B = _as_2d_f64("B", B)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatchError(
            f"A has q={A.shape[1]} but B has q={B.shape[1]}"
        )
    na, nb = A.shape[0], B.shape[0]
    m = len(bank.bandwidths)

    # d kappa(x, y) / dx = -(1/m) sum_s exp(-||x-y||^2/(2 s^2)) (x - y) / s^2,
    # so only the exp/s^2 weights differ per bandwidth; fold them into S.
    sq_aa = cdist(A, A, "sqeuclidean")
    sq_ab = cdist(A, B, "sqeuclidean")
    S_aa = np.zeros_like(sq_aa)
    S_ab = np.zeros_like(sq_ab)
    for s in bank.bandwidths:
        s2 = s * s
        S_aa += np.exp(-sq_aa / (2.0 * s2)) / s2
        S_ab += np.exp(-sq_ab / (2.0 * s2)) / s2
    S_aa /= m
    S_ab /= m

    self_term = S_aa.sum(axis=1)[:, None] * A - S_aa @ A
    cross_term = S_ab.sum(axis=1)[:, None] * A - S_ab @ B
    return (-2.0 / (na * na)) * self_term + (2.0 / (na * nb)) * cross_term


def marginal_distance(L_S: np.ndarray, L_T: np.ndarray) -> float:
    """L2 distance between the mean rows of two classifier-output matrices."""
    L_S = _as_2d_f64("L_S", L_S)
    L_T = _as_2d_f64("L_T", L_T)
    if L_S.shape[1] != L_T.shape[1]:
        raise DimensionMismatchError(
            f"output widths differ: {L_S.shape[1]} vs {L_T.shape[1]}"
        )
    return float(np.linalg.norm(L_S.mean(axis=0) - L_T.mean(axis=0)))


def conditional_distance(
    source: FeatureSet,
    target: FeatureSet,
    confident_indices: np.ndarray,
    confident_labels: np.ndarray,
) -> float:
    """Class-wise mean raw-feature distance between source and confident target.

    Averages ``||mean source_c - mean confident_c||_2`` over the classes c
    present on BOTH sides; classes with no confident examples are skipped.
    Operates on raw features, not classifier outputs.
    """
    if source.labels is None:
        raise ValidationError("conditional distance needs a labeled source set")
    if source.d != target.d:
        raise DimensionMismatchError(
            f"source d={source.d} but target d={target.d}"
        )
    confident_indices = np.asarray(confident_indices, dtype=np.int64)
    confident_labels = np.asarray(confident_labels, dtype=np.int64)
    if confident_indices.size == 0:
        raise NoSharedClassesError("confident set is empty")
    Xs = source.features64()
    Xt = target.features64()[confident_indices]
    total = 0.0
    shared = 0
    for c in np.unique(source.labels):
        mask = confident_labels == c
        if not mask.any():
            continue
        mu_s = Xs[source.labels == c].mean(axis=0)
        mu_t = Xt[mask].mean(axis=0)
        total += float(np.linalg.norm(mu_s - mu_t))
        shared += 1
    if shared == 0:
        raise NoSharedClassesError("no class present in both source and confident set")
    return total / shared


@dataclass(frozen=True)
class DistanceRecord:
    """Distances logged for one training run."""

    marginal: float
    conditional: tuple[Optional[float], ...]
    mmd2_values: tuple[float, ...]

    def __post_init__(self):
        vals = [self.marginal, *self.mmd2_values]
        vals += [c for c in self.conditional if c is not None]
        if any(not np.isfinite(v) for v in vals):
            raise ValidationError("distance record contains non-finite values")
        if self.marginal < 0 or any(v < -1e-9 for v in self.mmd2_values):
            raise ValidationError("distances must be non-negative")
