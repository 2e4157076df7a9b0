"""Shared domain types, elementary vector operators, and the trial-stream contract.

Every Monte-Carlo simulation in this package draws its noise from a pure
function of ``(master_seed, trial_index)``, so results are bit-identical
across runs and independent of execution order or worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox

from ._validation import check_seed, check_vector

__all__ = [
    "TrueDataset",
    "StreamSeed",
    "TrialStreams",
    "range_norm",
    "positive_part",
    "negative_part",
]

# Relative tolerance for the "counts sum to the public total" consistency check.
CONSISTENT_TOTAL_RTOL = 1e-9


@dataclass(frozen=True)
class TrueDataset:
    """Per-entity true counts plus the public invariant total.

    Parameters
    ----------
    entity_ids : sequence of str
        Opaque labels, one per entity; duplicates rejected.
    counts : array-like
        Non-negative per-entity counts, length >= 2.
    weights : array-like, optional
        Strictly positive per-entity multipliers; defaults to all ones.
    total : float, optional
        Public invariant total C > 0; defaults to ``counts.sum()``.
    consistent : bool, optional
        Declare that counts must sum to ``total`` (within 1e-9 * C).
        ``None`` auto-detects; ``True`` enforces and raises on violation.
    """

    entity_ids: tuple
    counts: np.ndarray
    weights: np.ndarray
    total: float
    consistent: bool = field(default=True)

    def __init__(self, entity_ids, counts, weights=None, total=None, consistent=None):
        ids = tuple(str(e) for e in entity_ids)
        if len(set(ids)) != len(ids):
            raise ValueError("entity_ids must be unique")
        x = check_vector(counts, "counts", min_len=2)
        if len(ids) != x.size:
            raise ValueError(f"{len(ids)} entity_ids but {x.size} counts")
        if np.any(x < 0):
            bad = ids[int(np.argmax(x < 0))]
            raise ValueError(f"counts must be non-negative (entity {bad!r})")
        if weights is None:
            a = np.ones_like(x)
        else:
            a = check_vector(weights, "weights", min_len=1)
            if a.size != x.size:
                raise ValueError(f"{a.size} weights but {x.size} counts")
            if np.any(a <= 0):
                bad = ids[int(np.argmax(a <= 0))]
                raise ValueError(f"weights must be strictly positive (entity {bad!r})")
        c = float(x.sum()) if total is None else float(total)
        if not np.isfinite(c) or c <= 0:
            raise ValueError(f"total must be a positive finite real, got {c!r}")
        matches = abs(x.sum() - c) <= CONSISTENT_TOTAL_RTOL * c
        if consistent is None:
            consistent = bool(matches)
        elif consistent and not matches:
            raise ValueError(
                f"dataset declared consistent but counts sum to {x.sum()!r}, not {c!r}"
            )
        x.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "entity_ids", ids)
        object.__setattr__(self, "counts", x)
        object.__setattr__(self, "weights", a)
        object.__setattr__(self, "total", c)
        object.__setattr__(self, "consistent", bool(consistent))

    @property
    def n(self) -> int:
        return self.counts.size


@dataclass(frozen=True)
class StreamSeed:
    """Address of one trial's noise stream: (master_seed, trial_index)."""

    master_seed: int
    trial_index: int

    def __post_init__(self):
        object.__setattr__(self, "master_seed", check_seed(self.master_seed))
        object.__setattr__(self, "trial_index", check_seed(self.trial_index, "trial_index"))


def _philox_key(master_seed: int, trial_index: int) -> int:
    # 128-bit key = master seed in the high word, trial index in the low word.
    return (master_seed << 64) | trial_index


class TrialStreams:
    """Per-trial independent random streams under one master seed.

    Trial ``t`` reads from ``Philox(key=(master_seed << 64) | t)``, a pure
    function of the pair.  ``uniform_rows``/``normal_rows`` fill one matrix
    row per consecutive trial and are bit-identical to constructing each
    trial's generator from scratch (the state-reset fast path is pinned
    against the reference constructor in the tests).
    """

    def __init__(self, master_seed: int):
        self.master_seed = check_seed(master_seed)
        self._bg = Philox(key=_philox_key(self.master_seed, 0))
        self._gen = Generator(self._bg)
        self._state = self._bg.state

    @staticmethod
    def reference_generator(seed: StreamSeed) -> Generator:
        """Fresh generator for one trial; the contract's reference path."""
        return Generator(Philox(key=_philox_key(seed.master_seed, seed.trial_index)))

    def _reset(self, trial_index: int) -> Generator:
        st = self._state
        inner = st["state"]
        inner["key"][0] = trial_index
        inner["counter"][:] = 0
        st["buffer_pos"] = 4
        st["has_uint32"] = 0
        st["uinteger"] = 0
        self._bg.state = st
        return self._gen

    def uniform_rows(self, first_trial: int, m: int, n: int) -> np.ndarray:
        """(m, n) matrix; row i drawn from the stream of trial first_trial+i."""
        check_seed(first_trial, "first_trial")
        out = np.empty((m, n))
        for i in range(m):
            out[i] = self._reset(first_trial + i).random(n)
        return out

    def normal_rows(self, first_trial: int, m: int, n: int) -> np.ndarray:
        """(m, n) matrix of standard normals, one trial stream per row."""
        check_seed(first_trial, "first_trial")
        out = np.empty((m, n))
        for i in range(m):
            out[i] = self._reset(first_trial + i).standard_normal(n)
        return out


def range_norm(v) -> float:
    """Spread of a vector: max entry minus min entry (>= 0)."""
    v = check_vector(v, "v")
    return float(v.max() - v.min())


def positive_part(v) -> np.ndarray:
    """Elementwise max(v, 0)."""
    return np.maximum(np.asarray(v, dtype=np.float64), 0.0)


def negative_part(v) -> np.ndarray:
    """Elementwise -min(v, 0); always >= 0."""
    return -np.minimum(np.asarray(v, dtype=np.float64), 0.0)
