"""Independent reference implementations used only to verify production code.

Every oracle here follows a different computational route from the library:
exhaustive enumeration, bisection, block KKT solves, grid search, arbitrary
precision, and adaptive quadrature.
"""

from __future__ import annotations

import itertools

import mpmath
import numpy as np


def projection_oracle_active_set(noisy: np.ndarray, total: float) -> np.ndarray:
    """Exact projection onto {v >= 0, sum v = total} by enumerating all
    2^n clamp patterns and taking the feasible candidate closest to the input."""
    n = noisy.size
    best, best_dist = None, np.inf
    for pattern in itertools.product([False, True], repeat=n):
        free = np.flatnonzero(~np.array(pattern))
        if free.size == 0:
            continue
        candidate = np.zeros(n)
        candidate[free] = noisy[free] + (total - noisy[free].sum()) / free.size
        if np.any(candidate[free] < -1e-13):
            continue
        candidate = np.maximum(candidate, 0.0)
        dist = float(np.sum((candidate - noisy) ** 2))
        if dist < best_dist:
            best, best_dist = candidate, dist
    return best


def threshold_oracle_bisection(sorted_desc: np.ndarray, total: float,
                               iterations: int = 200) -> float:
    """Bisection on h(T) = sum([v - T]_+) - total; h is decreasing."""
    lo, hi = 0.0, float(np.max(sorted_desc))
    if np.maximum(sorted_desc - lo, 0.0).sum() <= total:
        return 0.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if np.maximum(sorted_desc - mid, 0.0).sum() > total:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def affine_projection_oracle(noisy: np.ndarray, matrix: np.ndarray,
                             rhs: np.ndarray) -> np.ndarray:
    """Equality-constrained least squares through the full (n+m) KKT block."""
    n, m = noisy.size, rhs.size
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = np.eye(n)
    kkt[:n, n:] = matrix.T
    kkt[n:, :n] = matrix
    sol = np.linalg.solve(kkt, np.concatenate([noisy, rhs]))
    return sol[:n]


def simplex_grid_3(step: float) -> np.ndarray:
    """All points of the 3-simplex on a grid of the given step."""
    k = int(round(1.0 / step))
    pts = []
    for i in range(k + 1):
        for j in range(k - i + 1):
            pts.append((i * step, j * step, 1.0 - (i + j) * step))
    return np.asarray(pts)


def range_objective_grid_min(target: np.ndarray, grid: np.ndarray) -> float:
    """Minimum over the grid of the spread (max-min) of grid point - target."""
    dev = grid - target
    return float((dev.max(axis=1) - dev.min(axis=1)).min())


def phi_mpmath(z: float) -> float:
    """Standard normal CDF at 40 decimal digits."""
    with mpmath.workdps(40):
        return float(mpmath.ncdf(z))


def integral_phi_mpmath(a: float, t_lo: float, t_hi: float) -> float:
    """Adaptive arbitrary-precision quadrature of Phi(a t)."""
    with mpmath.workdps(30):
        return float(mpmath.quad(lambda t: mpmath.ncdf(a * t), [t_lo, t_hi]))
