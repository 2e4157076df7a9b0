"""scikit-learn style transformers wrapping the row-wise operators.

Each transformer treats a row of ``X`` as one dataset replica, so the noise
transformers assign consecutive trial streams to consecutive rows and every
projection/allocation applies independently per row.  All follow the
stateless-``fit`` convention and compose with sklearn pipelines.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_matrix, check_positive, check_seed
from .allocation import _bl_rows, _pos_rows
from .core import TrialStreams
from .mechanisms import NoiseKind, NoiseSpec, noisy_rows
from .projection import project_sum_nonneg_rows, project_sum_rows

__all__ = [
    "LaplaceNoiser",
    "GaussianNoiser",
    "SumProjector",
    "SimplexProjector",
    "BaselineAllocator",
    "SimplexAllocator",
]


class _NoiserBase(BaseEstimator, TransformerMixin):
    _kind: NoiseKind

    def __init__(self, scale=1.0, master_seed=0, first_trial=0):
        self.scale = scale
        self.master_seed = master_seed
        self.first_trial = first_trial

    def _check_params(self):
        check_positive(self.scale, "scale")
        check_seed(self.master_seed)
        check_seed(self.first_trial, "first_trial")

    def fit(self, X, y=None):
        self._check_params()
        return self

    def transform(self, X):
        """Add mechanism noise; row i uses trial stream first_trial + i."""
        self._check_params()
        X = check_matrix(X)
        spec = NoiseSpec(self._kind, self.scale)
        streams = TrialStreams(self.master_seed)
        eta = noisy_rows(np.zeros(X.shape[1]), spec, streams, self.first_trial, X.shape[0])
        return X + eta


class LaplaceNoiser(_NoiserBase):
    """Adds i.i.d. Laplace(0, scale) noise to each entry."""

    _kind = NoiseKind.LAPLACE


class GaussianNoiser(_NoiserBase):
    """Adds i.i.d. N(0, scale^2) noise to each entry."""

    _kind = NoiseKind.GAUSSIAN


class SumProjector(BaseEstimator, TransformerMixin):
    """Projects each row onto the hyperplane {sum v = total}."""

    def __init__(self, total=1.0):
        self.total = total

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return project_sum_rows(check_matrix(X), float(self.total))


class SimplexProjector(BaseEstimator, TransformerMixin):
    """Projects each row onto {v >= 0, sum v = total}."""

    def __init__(self, total=1.0):
        self.total = total

    def fit(self, X, y=None):
        check_positive(self.total, "total")
        return self

    def transform(self, X):
        check_positive(self.total, "total")
        return project_sum_nonneg_rows(check_matrix(X), float(self.total))[1]


class _AllocatorBase(BaseEstimator, TransformerMixin):
    def __init__(self, weights=None):
        self.weights = weights

    def fit(self, X, y=None):
        return self

    def _weights_for(self, X):
        if self.weights is None:
            return np.ones(X.shape[1])
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (X.shape[1],):
            raise ValueError(f"weights must have shape ({X.shape[1]},), got {w.shape}")
        return w


class BaselineAllocator(_AllocatorBase):
    """Clamp-then-allocate shares per row; degenerate rows become uniform."""

    def transform(self, X):
        X = check_matrix(X)
        return _bl_rows(X, self._weights_for(X))[0]


class SimplexAllocator(_AllocatorBase):
    """Allocate-then-project shares per row; degenerate rows become uniform."""

    def transform(self, X):
        X = check_matrix(X)
        return _pos_rows(X, self._weights_for(X))[0]
