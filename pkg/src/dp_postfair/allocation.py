"""Downstream fund-allocation mechanisms and their fairness audits.

The proportional formula maps counts to budget shares,
``share_i = a_i x_i / sum_j a_j x_j``.  Two ways of making noisy counts
feasible are compared: clamp-then-allocate (baseline) and
allocate-then-project-onto-the-simplex.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.random import Generator, Philox

from ._validation import check_positive, check_seed, check_trial_count, check_vector
from .core import TrueDataset
from .mechanisms import NoiseSpec
from .montecarlo import TrialMoments, run_trials
from .projection import project_sum_nonneg_rows

__all__ = [
    "AllocationMechanism",
    "AllocationProblem",
    "AllocationReport",
    "DegenerateSampleError",
    "true_allocation",
    "noisy_allocation",
    "mechanism_bl",
    "mechanism_pos",
    "allocation_audit",
    "compare_mechanisms",
    "MechanismComparison",
    "l1_objective_check",
    "synthetic_districts",
]


class DegenerateSampleError(ValueError):
    """Weighted noisy counts summed to zero; the share formula is undefined."""


class AllocationMechanism(enum.Enum):
    BL = "bl"    # clamp noisy counts at zero, then allocate
    POS = "pos"  # allocate raw noisy counts, then project onto the simplex


@dataclass(frozen=True)
class AllocationProblem:
    """Dataset plus the total budget to distribute."""

    dataset: TrueDataset
    budget: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "budget", check_positive(self.budget, "budget"))
        d = self.dataset
        if float((d.weights * d.counts).sum()) <= 0.0:
            raise ValueError("at least one weighted count must be positive")


@dataclass(frozen=True)
class AllocationReport:
    """Monte-Carlo allocation bias (share units) and derived fairness metrics."""

    per_entity_bias: np.ndarray
    per_entity_stderr: np.ndarray
    alpha_fairness: float
    alpha_stderr: float
    cost_of_privacy: float
    cost_of_privacy_stderr: float
    misallocated_funds: np.ndarray
    trials: int
    mechanism: AllocationMechanism
    noise: NoiseSpec
    budget: float
    degenerate_trials: int

    def __post_init__(self):
        b = self.per_entity_bias
        if abs(float(b.sum())) > 1e-9:
            raise ValueError("allocation biases must sum to zero")
        half_l1 = 0.5 * self.budget * float(np.abs(b).sum())
        if abs(self.cost_of_privacy - half_l1) > 1e-9 * self.budget:
            raise ValueError("cost of privacy must equal (B/2) * l1 norm of the bias")
        if not np.array_equal(self.misallocated_funds, b * self.budget):
            raise ValueError("misallocated funds must equal bias * budget")
        self.per_entity_bias.setflags(write=False)
        self.per_entity_stderr.setflags(write=False)
        self.misallocated_funds.setflags(write=False)


class MechanismOutput(NamedTuple):
    shares: np.ndarray
    degenerate: bool


def true_allocation(problem: AllocationProblem) -> np.ndarray:
    """Proportional budget shares of the true counts; a simplex point."""
    d = problem.dataset
    weighted = d.weights * d.counts
    denom = float(weighted.sum())
    if denom <= 0.0:
        raise ValueError("all weighted counts are zero; allocation undefined")
    return weighted / denom


def noisy_allocation(noisy, weights) -> np.ndarray:
    """Share formula applied to noisy counts; sums to 1 but may go negative."""
    v = check_vector(noisy, "noisy")
    a = check_vector(weights, "weights")
    weighted = a * v
    denom = float(weighted.sum())
    if denom == 0.0:
        raise DegenerateSampleError("weighted noisy counts sum to zero")
    return weighted / denom


def mechanism_bl(noisy, weights) -> MechanismOutput:
    """Clamp noisy counts at zero, then allocate proportionally.

    A zero denominator (every clamped count zero) falls back to the uniform
    allocation and flags the trial degenerate.
    """
    v = check_vector(noisy, "noisy")
    a = check_vector(weights, "weights")
    weighted = a * np.maximum(v, 0.0)
    denom = float(weighted.sum())
    if denom == 0.0:
        return MechanismOutput(np.full(v.size, 1.0 / v.size), True)
    return MechanismOutput(weighted / denom, False)


def mechanism_pos(noisy, weights) -> MechanismOutput:
    """Allocate the raw noisy counts, then project onto the probability simplex."""
    v = check_vector(noisy, "noisy")
    a = check_vector(weights, "weights")
    try:
        raw = noisy_allocation(v, a)
    except DegenerateSampleError:
        return MechanismOutput(np.full(v.size, 1.0 / v.size), True)
    return MechanismOutput(project_sum_nonneg_rows(raw.reshape(1, -1), 1.0)[1][0], False)


def _bl_rows(noisy: np.ndarray, weights: np.ndarray):
    weighted = weights * np.maximum(noisy, 0.0)
    denom = weighted.sum(axis=1)
    bad = denom == 0.0
    denom[bad] = 1.0
    shares = weighted / denom[:, None]
    if np.any(bad):
        shares[bad] = 1.0 / noisy.shape[1]
    return shares, int(bad.sum())


def _pos_rows(noisy: np.ndarray, weights: np.ndarray):
    weighted = weights * noisy
    denom = weighted.sum(axis=1)
    bad = denom == 0.0
    denom[bad] = 1.0
    raw = weighted / denom[:, None]
    shares = project_sum_nonneg_rows(raw, 1.0)[1]
    if np.any(bad):
        shares[bad] = 1.0 / noisy.shape[1]
    return shares, int(bad.sum())


_ROW_MECHANISMS = {
    AllocationMechanism.BL: _bl_rows,
    AllocationMechanism.POS: _pos_rows,
}


def _report(moments: TrialMoments, sl: slice, problem: AllocationProblem,
            spec: NoiseSpec, mechanism: AllocationMechanism, trials: int,
            degenerate: int) -> AllocationReport:
    target = true_allocation(problem)
    bias = moments.mean()[sl] - target
    offset = sl.start or 0
    i_max = int(np.argmax(bias)) + offset
    i_min = int(np.argmin(bias)) + offset
    b = problem.budget
    cop_coeffs = np.zeros(moments.sums.size)
    cop_coeffs[sl] = 0.5 * b * np.sign(bias)
    return AllocationReport(
        per_entity_bias=bias,
        per_entity_stderr=moments.stderr()[sl],
        alpha_fairness=float(bias.max() - bias.min()),
        alpha_stderr=moments.pair_diff_stderr(i_max, i_min),
        cost_of_privacy=0.5 * b * float(np.abs(bias).sum()),
        cost_of_privacy_stderr=moments.linear_stderr(cop_coeffs),
        misallocated_funds=bias * b,
        trials=trials,
        mechanism=mechanism,
        noise=spec,
        budget=b,
        degenerate_trials=degenerate,
    )


def allocation_audit(
    problem: AllocationProblem,
    spec: NoiseSpec,
    mechanism: AllocationMechanism | str,
    trials: int = 100_000,
    master_seed: int = 0,
    workers: int = 1,
) -> AllocationReport:
    """Monte-Carlo per-entity allocation bias of one mechanism."""
    mechanism = AllocationMechanism(mechanism)
    trials = check_trial_count(trials, 100)
    d = problem.dataset
    rows = _ROW_MECHANISMS[mechanism]

    def features(noisy):
        return rows(noisy, d.weights)

    moments = run_trials(d.counts, spec, features, trials, check_seed(master_seed), workers)
    return _report(moments, slice(0, d.n), problem, spec, mechanism, trials,
                   int(moments.extra[0]))


@dataclass(frozen=True)
class MechanismComparison:
    """Both mechanisms audited on shared trials, with exact difference stats."""

    baseline: AllocationReport
    projected: AllocationReport
    alpha_gap: float          # alpha(BL) - alpha(PoS)
    alpha_gap_stderr: float
    cop_gap: float            # CoP(BL) - CoP(PoS)
    cop_gap_stderr: float


def compare_mechanisms(
    problem: AllocationProblem,
    spec: NoiseSpec,
    trials: int = 100_000,
    master_seed: int = 0,
    workers: int = 1,
) -> MechanismComparison:
    """Audit BL and PoS on the same noisy trials and difference their metrics.

    Sharing trials makes the fairness-gap and cost-of-privacy differences
    paired statistics, whose standard errors come from the joint covariance.
    """
    trials = check_trial_count(trials, 100)
    d = problem.dataset

    def features(noisy):
        bl, n_bl = _bl_rows(noisy, d.weights)
        pos, n_pos = _pos_rows(noisy, d.weights)
        return np.hstack((bl, pos)), (n_bl, n_pos)

    moments = run_trials(d.counts, spec, features, trials, check_seed(master_seed), workers)
    n = d.n
    bl = _report(moments, slice(0, n), problem, spec, AllocationMechanism.BL, trials,
                 int(moments.extra[0]))
    pos = _report(moments, slice(n, 2 * n), problem, spec, AllocationMechanism.POS, trials,
                  int(moments.extra[1]))

    coeffs = np.zeros(2 * n)
    bl_bias, pos_bias = bl.per_entity_bias, pos.per_entity_bias
    coeffs[int(np.argmax(bl_bias))] += 1.0
    coeffs[int(np.argmin(bl_bias))] -= 1.0
    coeffs[n + int(np.argmax(pos_bias))] -= 1.0
    coeffs[n + int(np.argmin(pos_bias))] += 1.0
    alpha_gap_se = moments.linear_stderr(coeffs)

    b = problem.budget
    cop_coeffs = np.concatenate((0.5 * b * np.sign(bl_bias), -0.5 * b * np.sign(pos_bias)))
    cop_gap_se = moments.linear_stderr(cop_coeffs)

    return MechanismComparison(
        baseline=bl,
        projected=pos,
        alpha_gap=bl.alpha_fairness - pos.alpha_fairness,
        alpha_gap_stderr=alpha_gap_se,
        cop_gap=bl.cost_of_privacy - pos.cost_of_privacy,
        cop_gap_stderr=cop_gap_se,
    )


def l1_objective_check(noisy_alloc, candidate, budget: float) -> float:
    """(B/2) * l1 distance between a candidate simplex point and the raw shares."""
    q = check_vector(noisy_alloc, "noisy_alloc")
    v = check_vector(candidate, "candidate")
    if v.size != q.size:
        raise ValueError("candidate and noisy_alloc must have the same length")
    if np.any(v < -1e-12) or abs(float(v.sum()) - 1.0) > 1e-9:
        raise ValueError("candidate must lie on the probability simplex")
    return 0.5 * float(budget) * float(np.abs(v - q).sum())


def synthetic_districts(n: int = 100, master_seed: int = 7, budget: float = 1.0) -> AllocationProblem:
    """Synthetic district benchmark: log-normal counts, weights uniform in [1, 2]."""
    if n < 2:
        raise ValueError("need at least two districts")
    gen = Generator(Philox(key=(check_seed(master_seed) << 64) | (2**63)))
    counts = np.exp(gen.normal(np.log(300.0), 1.2, size=n)).round()
    weights = gen.uniform(1.0, 2.0, size=n)
    ids = [f"district-{k:04d}" for k in range(n)]
    return AllocationProblem(TrueDataset(ids, counts, weights), budget)
