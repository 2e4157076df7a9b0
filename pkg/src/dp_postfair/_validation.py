"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numbers

import numpy as np

_UINT64_MAX = 2**64 - 1


def check_vector(x, name: str = "x", min_len: int = 1) -> np.ndarray:
    """Coerce to a 1-D float64 array of finite values."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    if v.size < min_len:
        raise ValueError(f"{name} must have at least {min_len} element(s), got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v


def check_matrix(x, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float64 array of finite values."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} must be finite")
    return m


def check_positive(value, name: str) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite real, got {value!r}")
    return float(value)


def check_seed(value, name: str = "master_seed") -> int:
    if not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if not 0 <= value <= _UINT64_MAX:
        raise ValueError(f"{name} must fit in an unsigned 64-bit integer, got {value}")
    return value


def check_trial_count(trials, minimum: int, name: str = "trials") -> int:
    if not isinstance(trials, numbers.Integral) or int(trials) < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {trials!r}")
    return int(trials)
