"""Deterministic chunked Monte-Carlo accumulation.

Trials are processed in fixed-size chunks; each chunk's partial sums are a
pure function of (master_seed, trial range), and partials are merged in a
pairwise tree over chunk index.  The result is therefore bit-identical for
any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._validation import check_seed, check_trial_count
from .core import TrialStreams
from .mechanisms import NoiseSpec, noisy_rows

__all__ = ["TrialMoments", "run_trials", "CHUNK_TRIALS", "SCATTER_WIDTH_CAP"]

# Fixed chunk size: part of the algorithm, never derived from worker count.
CHUNK_TRIALS = 8192
# Widest feature vector for which the full cross-moment matrix is kept.
SCATTER_WIDTH_CAP = 1024


@dataclass
class TrialMoments:
    """First and second moments of a per-trial feature vector.

    ``scatter`` is the full sum of outer products when the feature width is at
    most SCATTER_WIDTH_CAP, else None (``sumsq`` always carries the diagonal).
    ``extra`` accumulates integer side-channel counters (e.g. degenerate trials).
    """

    sums: np.ndarray
    sumsq: np.ndarray
    scatter: np.ndarray | None
    trials: int
    extra: np.ndarray | None = None

    def mean(self) -> np.ndarray:
        return self.sums / self.trials

    def stderr(self) -> np.ndarray:
        var = (self.sumsq - self.sums**2 / self.trials) / (self.trials - 1)
        return np.sqrt(np.maximum(var, 0.0) / self.trials)

    def linear_stderr(self, coeffs: np.ndarray) -> float:
        """Standard error of mean(c . y) for per-trial feature y."""
        c = np.asarray(coeffs, dtype=np.float64)
        if self.scatter is None:
            raise ValueError("cross moments were not accumulated for this width")
        ssq = c @ self.scatter @ c
        s = c @ self.sums
        var = (ssq - s * s / self.trials) / (self.trials - 1)
        return float(np.sqrt(max(var, 0.0) / self.trials))

    def pair_diff_stderr(self, i: int, j: int) -> float:
        """Standard error of mean(y_i - y_j), covariance-aware."""
        if self.scatter is None:
            # Cauchy-Schwarz bound: sd(y_i - y_j) <= sd(y_i) + sd(y_j).
            se = self.stderr()
            return float(se[i] + se[j])
        c = np.zeros(self.sums.size)
        c[i], c[j] = 1.0, -1.0
        return self.linear_stderr(c)


def _merge(a: TrialMoments, b: TrialMoments) -> TrialMoments:
    scatter = None if a.scatter is None else a.scatter + b.scatter
    extra = None if a.extra is None else a.extra + b.extra
    return TrialMoments(a.sums + b.sums, a.sumsq + b.sumsq, scatter,
                        a.trials + b.trials, extra)


def _tree_reduce(parts: list[TrialMoments]) -> TrialMoments:
    while len(parts) > 1:
        parts = [
            _merge(parts[k], parts[k + 1]) if k + 1 < len(parts) else parts[k]
            for k in range(0, len(parts), 2)
        ]
    return parts[0]


def run_trials(
    counts: np.ndarray,
    spec: NoiseSpec,
    feature_fn: Callable[[np.ndarray], tuple[np.ndarray, int]],
    trials: int,
    master_seed: int,
    workers: int = 1,
    with_scatter: bool = True,
    chunk_trials: int = CHUNK_TRIALS,
) -> TrialMoments:
    """Accumulate moments of ``feature_fn(noisy_rows)`` over seeded trials.

    ``feature_fn`` maps an (m, n) matrix of noisy datasets to an (m, w)
    feature matrix plus an integer side count; it must be a pure vectorized
    function of its input.
    """
    trials = check_trial_count(trials, 1)
    master_seed = check_seed(master_seed)
    if workers < 1:
        raise ValueError("workers must be >= 1")

    starts = list(range(0, trials, chunk_trials))

    def one_chunk(start: int) -> TrialMoments:
        m = min(chunk_trials, trials - start)
        streams = TrialStreams(master_seed)  # thread-local generator state
        noisy = noisy_rows(counts, spec, streams, start, m)
        feats, extra = feature_fn(noisy)
        keep_scatter = with_scatter and feats.shape[1] <= SCATTER_WIDTH_CAP
        scatter = feats.T @ feats if keep_scatter else None
        counters = np.atleast_1d(np.asarray(extra, dtype=np.int64))
        return TrialMoments(feats.sum(axis=0), (feats**2).sum(axis=0), scatter, m, counters)

    if workers == 1 or len(starts) == 1:
        parts = [one_chunk(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one_chunk, starts))  # ordered by chunk index
    return _tree_reduce(parts)
