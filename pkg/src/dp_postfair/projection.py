"""Euclidean projections used as post-processing steps.

``project_sum`` projects onto the hyperplane {sum v = C} (closed form: uniform
shift).  ``project_sum_nonneg`` projects onto {sum v = C, v >= 0} by shifting
the hyperplane projection down by a threshold T and clamping at zero, with T
found exactly by sort-and-scan.  ``project_affine`` is the general
equality-constrained case ``x~ - A^T (A A^T)^{-1} (A x~ - b)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._validation import check_matrix, check_positive, check_vector
from .core import negative_part

__all__ = [
    "ProjectionResult",
    "AffineConstraint",
    "RankDeficientConstraintError",
    "project_sum",
    "solve_threshold",
    "project_sum_nonneg",
    "threshold_upper_bound",
    "project_affine",
]

# Inputs already feasible up to this relative slack pass through unchanged,
# which makes repeated projection exactly idempotent in floating point.
_FEASIBLE_RTOL = 32 * np.finfo(np.float64).eps


class RankDeficientConstraintError(ValueError):
    """Constraint matrix does not have full row rank."""


@dataclass(frozen=True)
class ProjectionResult:
    """Non-negative sum-constrained projection output.

    ``projected`` sums to the target total and is elementwise non-negative;
    ``threshold`` is the unique scalar T >= 0 with sum([base - T]_+) = total,
    where base is the plain sum-constrained projection; ``active_zero_set``
    holds the indices clamped to exactly zero.
    """

    projected: np.ndarray
    threshold: float
    active_zero_set: np.ndarray

    def __post_init__(self):
        self.projected.setflags(write=False)
        self.active_zero_set.setflags(write=False)


def project_sum(noisy, total: float) -> np.ndarray:
    """Closest vector to ``noisy`` with entries summing to ``total``."""
    v = check_vector(noisy, "noisy")
    return v + (total - v.sum()) / v.size


def project_sum_rows(noisy: np.ndarray, total: float) -> np.ndarray:
    """Row-wise ``project_sum`` for a (m, n) batch."""
    return noisy + (total - noisy.sum(axis=1, keepdims=True)) / noisy.shape[1]


def solve_threshold(sorted_base, total: float) -> float:
    """Threshold T >= 0 with sum([v_i - T]_+) = total for descending-sorted v.

    Sort-and-scan: the largest k with (sum of top k - total)/k < v_k fixes
    T = max(0, (sum of top k - total)/k).
    """
    v = check_vector(sorted_base, "sorted_base")
    check_positive(total, "total")
    if np.any(np.diff(v) > 0):
        raise ValueError("sorted_base must be sorted in descending order")
    return float(_threshold_rows(v.reshape(1, -1), total)[0])


def _threshold_rows(sorted_desc: np.ndarray, total: float) -> np.ndarray:
    """Vectorized sort-and-scan threshold for rows already sorted descending."""
    m, n = sorted_desc.shape
    cs = np.cumsum(sorted_desc, axis=1)
    j = np.arange(1, n + 1, dtype=np.float64)
    ok = (cs - total) / j < sorted_desc  # strict: ties clamp to exactly zero
    # ok[:, 0] always holds since total > 0; take the last valid index per row.
    k = n - 1 - np.argmax(ok[:, ::-1], axis=1)
    t = (cs[np.arange(m), k] - total) / (k + 1.0)
    return np.maximum(t, 0.0)


def project_sum_nonneg_rows(noisy: np.ndarray, total: float):
    """Row-wise non-negative sum projection; returns (base, projected, thresholds)."""
    base = project_sum_rows(noisy, total)
    t = _threshold_rows(-np.sort(-base, axis=1), total)
    projected = np.maximum(base - t[:, None], 0.0)
    return base, projected, t


def project_sum_nonneg(noisy, total: float) -> ProjectionResult:
    """Euclidean projection onto {v >= 0, sum v = total}.

    Idempotent: inputs already feasible (non-negative, summing to ``total`` up
    to float round-off) are returned unchanged with threshold 0.
    """
    v = check_vector(noisy, "noisy")
    check_positive(total, "total")
    slack = _FEASIBLE_RTOL * max(1.0, abs(total), float(np.abs(v).sum()))
    if np.all(v >= 0.0) and abs(v.sum() - total) <= slack:
        return ProjectionResult(v.copy(), 0.0, np.flatnonzero(v == 0.0))
    _, projected, t = project_sum_nonneg_rows(v.reshape(1, -1), total)
    projected = projected[0]
    return ProjectionResult(projected, float(t[0]), np.flatnonzero(projected == 0.0))


def threshold_upper_bound(pi_s_output) -> float:
    """Sum of negative parts; never below the exact threshold of the same input."""
    return float(negative_part(check_vector(pi_s_output, "pi_s_output")).sum())


@dataclass(frozen=True)
class AffineConstraint:
    """Full-row-rank affine equality system A v = b."""

    matrix: np.ndarray
    rhs: np.ndarray

    def __init__(self, matrix, rhs):
        a = check_matrix(matrix, "matrix")
        b = check_vector(rhs, "rhs")
        if a.shape[0] != b.size:
            raise ValueError(f"matrix has {a.shape[0]} rows but rhs has {b.size}")
        if a.shape[0] > a.shape[1]:
            raise RankDeficientConstraintError(
                f"more constraints ({a.shape[0]}) than variables ({a.shape[1]})"
            )
        # Pivoted QR of A^T exposes row-rank through the diagonal of R.
        r = scipy.linalg.qr(a.T, mode="r", pivoting=True)[0]
        diag = np.abs(np.diag(r))
        tol = 1e-10 * max(np.linalg.norm(a, 2), 1e-300)
        if diag.size < a.shape[0] or np.any(diag < tol):
            raise RankDeficientConstraintError("constraint matrix is rank deficient")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "rhs", b)


def project_affine(noisy, constraint: AffineConstraint) -> np.ndarray:
    """Euclidean projection onto {v : A v = b} via the m x m normal system."""
    v = check_vector(noisy, "noisy")
    a, b = constraint.matrix, constraint.rhs
    if a.shape[1] != v.size:
        raise ValueError(f"constraint expects {a.shape[1]} variables, got {v.size}")
    gram = a @ a.T
    residual = a @ v - b
    y = np.linalg.solve(gram, residual)  # LU with partial pivoting
    return v - a.T @ y
