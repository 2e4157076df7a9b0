"""Calibrated noise injection: Laplace and Gaussian mechanisms.

Laplace samples go through the inverse CDF,
``eta = -scale * sign(u) * ln(1 - 2|u|)`` for u uniform on (-1/2, 1/2);
Gaussian samples use the generator's standard normals scaled by sigma.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive
from .core import StreamSeed, TrialStreams, TrueDataset

__all__ = [
    "NoiseKind",
    "Budget",
    "NoiseSpec",
    "scale_from_budget",
    "sample_noisy",
    "noisy_rows",
]

# Multiplicative margin that turns c^2 > 2 ln(1.25/delta) into a computable scale.
_GAUSSIAN_STRICTNESS = 1.0 + 1e-12


class NoiseKind(enum.Enum):
    LAPLACE = "laplace"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class Budget:
    """(epsilon, delta, sensitivity) triple a scale was derived from."""

    epsilon: float
    delta: float
    sensitivity: float


@dataclass(frozen=True)
class NoiseSpec:
    """Noise mechanism kind plus its scale (lambda for Laplace, sigma for Gaussian).

    ``budget`` is None for directly specified scales; otherwise the scale must
    be the one implied by the budget (validated at construction).
    """

    kind: NoiseKind
    scale: float
    budget: Budget | None = None

    def __post_init__(self):
        if not isinstance(self.kind, NoiseKind):
            object.__setattr__(self, "kind", NoiseKind(self.kind))
        object.__setattr__(self, "scale", check_positive(self.scale, "scale"))
        if self.budget is not None:
            b = self.budget
            check_positive(b.epsilon, "epsilon")
            check_positive(b.sensitivity, "sensitivity")
            if self.kind is NoiseKind.LAPLACE:
                if b.delta != 0.0:
                    raise ValueError("Laplace budget requires delta = 0")
                implied = b.sensitivity / b.epsilon
            else:
                if not 0.0 < b.delta < 1.0:
                    raise ValueError("Gaussian budget requires 0 < delta < 1")
                implied = _gaussian_scale(b.epsilon, b.delta, b.sensitivity)
            if not math.isclose(self.scale, implied, rel_tol=1e-12):
                raise ValueError(
                    f"scale {self.scale!r} does not match budget-implied {implied!r}"
                )


def _gaussian_scale(epsilon: float, delta: float, sensitivity: float) -> float:
    c = math.sqrt(2.0 * math.log(1.25 / delta))
    return _GAUSSIAN_STRICTNESS * c * sensitivity / epsilon


def scale_from_budget(
    kind: NoiseKind | str,
    epsilon: float,
    delta: float = 0.0,
    sensitivity: float = 1.0,
) -> NoiseSpec:
    """Convert a privacy budget to a calibrated NoiseSpec.

    Laplace: scale = sensitivity / epsilon (delta must be 0).
    Gaussian: scale = (1 + 1e-12) * sqrt(2 ln(1.25/delta)) * sensitivity / epsilon,
    which satisfies the strict calibration inequality with a negligible margin.
    """
    kind = NoiseKind(kind)
    check_positive(epsilon, "epsilon")
    check_positive(sensitivity, "sensitivity")
    if kind is NoiseKind.LAPLACE:
        if delta != 0.0:
            raise ValueError("Laplace budget requires delta = 0")
        scale = sensitivity / epsilon
    else:
        if delta == 0.0:
            raise ValueError("Gaussian mechanism requires delta > 0")
        if not 0.0 < delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
        scale = _gaussian_scale(epsilon, delta, sensitivity)
    return NoiseSpec(kind, scale, Budget(float(epsilon), float(delta), float(sensitivity)))


def _laplace_from_uniform(u01: np.ndarray, scale: float) -> np.ndarray:
    # u01 in [0, 1) -> u in [-1/2, 1/2); inverse CDF of Laplace(0, scale).
    u = u01 - 0.5
    mag = np.maximum(1.0 - 2.0 * np.abs(u), np.finfo(np.float64).tiny)
    return -scale * np.sign(u) * np.log(mag)


def noisy_rows(
    counts: np.ndarray,
    spec: NoiseSpec,
    streams: TrialStreams,
    first_trial: int,
    m: int,
) -> np.ndarray:
    """(m, n) matrix of noisy datasets; row i uses trial first_trial + i."""
    n = counts.size
    if spec.kind is NoiseKind.LAPLACE:
        eta = _laplace_from_uniform(streams.uniform_rows(first_trial, m, n), spec.scale)
    else:
        eta = spec.scale * streams.normal_rows(first_trial, m, n)
    return counts + eta


def sample_noisy(dataset: TrueDataset, spec: NoiseSpec, seed: StreamSeed) -> np.ndarray:
    """One noisy dataset x + eta, deterministic in (master_seed, trial_index)."""
    streams = TrialStreams(seed.master_seed)
    return noisy_rows(dataset.counts, spec, streams, seed.trial_index, 1)[0]
