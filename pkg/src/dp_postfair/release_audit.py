"""Monte-Carlo bias/fairness audits for the data-release setting, plus the
analytic fairness bounds for the Gaussian mechanism.

Per-entity bias of a post-processing step ``post`` is
``E[post(x~)] - x``; the fairness gap (alpha) is the spread (max - min)
of those biases.  The analytic path evaluates the Gaussian bound terms in
closed form through the antiderivative ``t*Phi(a t) + phi(a t)/a``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

from ._validation import check_positive, check_seed, check_trial_count
from .core import TrueDataset, range_norm
from .mechanisms import NoiseSpec
from .montecarlo import SCATTER_WIDTH_CAP, TrialMoments, run_trials
from .projection import project_sum_nonneg_rows, project_sum_rows

__all__ = [
    "PostProcess",
    "BiasReport",
    "BoundsMethod",
    "BoundsReport",
    "PairCheck",
    "BiasDifferenceReport",
    "estimate_bias",
    "bounds_gaussian",
    "bounds_empirical",
    "bias_difference_checks",
    "std_normal_cdf",
    "std_normal_pdf",
    "cdf_antiderivative",
    "expected_negative_part",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def std_normal_cdf(z):
    """Standard normal CDF via the complementary error function."""
    return ndtr(z)


def std_normal_pdf(z):
    return np.exp(-0.5 * np.square(z)) / _SQRT_2PI


def cdf_antiderivative(t, a: float):
    """Antiderivative of Phi(a t):  t*Phi(a t) + phi(a t)/a."""
    return t * ndtr(a * t) + std_normal_pdf(a * t) / a


def expected_negative_part(mu, std: float):
    """E[max(-Y, 0)] for Y ~ N(mu, std^2): std*phi(mu/std) - mu*Phi(-mu/std)."""
    z = np.asarray(mu, dtype=np.float64) / std
    return std * std_normal_pdf(z) - mu * ndtr(-z)


class PostProcess(enum.Enum):
    """Post-processing choices audited in the release setting."""

    PI_S = "pi_s"                # sum-constrained projection
    PI_S_PLUS = "pi_s_plus"      # non-negative sum-constrained projection
    RELU_PI_S = "relu_pi_s"      # clamp the sum projection at zero
    RELU = "relu"                # clamp raw noisy counts at zero


class BoundsMethod(enum.Enum):
    GAUSSIAN_ANALYTIC = "gaussian_analytic"
    MONTE_CARLO_EMPIRICAL = "monte_carlo_empirical"


@dataclass(frozen=True)
class BiasReport:
    """Per-entity Monte-Carlo bias and the fairness gap, in user entity order."""

    per_entity_bias: np.ndarray
    per_entity_stderr: np.ndarray
    alpha_fairness: float
    alpha_stderr: float
    trials: int
    mechanism: NoiseSpec
    post: PostProcess
    lower_bound: float | None = None
    upper_bound: float | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if np.any(self.per_entity_stderr < 0) or self.alpha_stderr < 0:
            raise ValueError("standard errors must be non-negative")
        if self.alpha_fairness != range_norm(self.per_entity_bias):
            raise ValueError("alpha_fairness must equal the bias spread")
        if self.lower_bound is not None and self.upper_bound is not None:
            if self.lower_bound > self.upper_bound:
                raise ValueError("lower_bound must not exceed upper_bound")
        self.per_entity_bias.setflags(write=False)
        self.per_entity_stderr.setflags(write=False)

    def with_bounds(self, lower: float, upper: float) -> "BiasReport":
        return replace(self, lower_bound=lower, upper_bound=upper)


@dataclass(frozen=True)
class BoundsReport:
    """Fairness-gap bounds: lower = first - last clamp bias, upper additionally
    capped by the data range."""

    lower: float
    upper: float
    relu_bias_first: float
    relu_bias_last: float
    expected_negparts: float
    data_range: float
    method: BoundsMethod
    lower_stderr: float | None = None
    upper_stderr: float | None = None

    def __post_init__(self):
        if self.lower != self.relu_bias_first - self.relu_bias_last:
            raise ValueError("lower must equal relu_bias_first - relu_bias_last")
        if self.upper != min(self.data_range, self.lower + self.expected_negparts):
            raise ValueError("upper must equal min(data_range, lower + negparts)")
        slack = 1e-9
        if self.method is BoundsMethod.MONTE_CARLO_EMPIRICAL:
            # Sampling noise can push the estimated lower above a range-capped
            # upper; widen the consistency slack accordingly.
            slack += 8.0 * ((self.lower_stderr or 0.0) + (self.upper_stderr or 0.0))
        if self.lower > self.upper + slack:
            raise ValueError(f"bounds inconsistent: lower {self.lower} > upper {self.upper}")


def _post_features(post: PostProcess, counts: np.ndarray, total: float):
    if post is PostProcess.PI_S:
        return lambda noisy: (project_sum_rows(noisy, total), 0)
    if post is PostProcess.PI_S_PLUS:
        return lambda noisy: (project_sum_nonneg_rows(noisy, total)[1], 0)
    if post is PostProcess.RELU_PI_S:
        return lambda noisy: (np.maximum(project_sum_rows(noisy, total), 0.0), 0)
    return lambda noisy: (np.maximum(noisy, 0.0), 0)


def estimate_bias(
    dataset: TrueDataset,
    spec: NoiseSpec,
    post: PostProcess = PostProcess.PI_S_PLUS,
    trials: int = 100_000,
    master_seed: int = 0,
    workers: int = 1,
) -> BiasReport:
    """Monte-Carlo per-entity bias of ``post`` applied to noisy counts.

    The estimate is the plain average of ``post(x~) - x`` over seeded trials;
    standard errors come from the per-trial sample variance, and the fairness
    gap's standard error uses the empirical covariance of the extreme pair.
    """
    trials = check_trial_count(trials, 100)
    x = dataset.counts
    moments = run_trials(
        x, spec, _post_features(post, x, dataset.total), trials,
        check_seed(master_seed), workers,
    )
    bias = moments.mean() - x
    i_max, i_min = int(np.argmax(bias)), int(np.argmin(bias))
    return BiasReport(
        per_entity_bias=bias,
        per_entity_stderr=moments.stderr(),
        alpha_fairness=range_norm(bias),
        alpha_stderr=moments.pair_diff_stderr(i_max, i_min),
        trials=trials,
        mechanism=spec,
        post=post,
    )


def _gaussian_coeff(n: int, sigma: float) -> float:
    # The sum projection turns i.i.d. N(0, sigma^2) noise into per-entity
    # N(0, (n-1) sigma^2 / n); a is the reciprocal of that standard deviation.
    return math.sqrt(n / (n - 1.0)) / sigma


def bounds_gaussian(dataset: TrueDataset, sigma: float) -> BoundsReport:
    """Closed-form fairness-gap bounds under Gaussian noise of scale sigma."""
    check_positive(sigma, "sigma")
    x = np.sort(dataset.counts)
    n = x.size
    if n < 2:
        raise ValueError("bounds require at least two entities")
    a = _gaussian_coeff(n, sigma)
    negparts = expected_negative_part(x, 1.0 / a)
    first, last = float(negparts[0]), float(negparts[-1])
    lower = first - last
    data_range = float(x[-1] - x[0])
    # Sanity bracket: the integral of Phi(a t) over [-x_n, -x_1] lies between
    # the interval length times its endpoint values.
    lo_br = float(ndtr(-a * x[-1])) * data_range
    hi_br = float(ndtr(-a * x[0])) * data_range
    if not (lo_br - 1e-12 <= lower <= hi_br + 1e-12):
        raise AssertionError("analytic integral escaped its bracket")
    total_negparts = float(negparts.sum())
    return BoundsReport(
        lower=lower,
        upper=min(data_range, lower + total_negparts),
        relu_bias_first=first,
        relu_bias_last=last,
        expected_negparts=total_negparts,
        data_range=data_range,
        method=BoundsMethod.GAUSSIAN_ANALYTIC,
    )


def bounds_empirical(
    dataset: TrueDataset,
    spec: NoiseSpec,
    trials: int = 100_000,
    master_seed: int = 0,
    workers: int = 1,
) -> BoundsReport:
    """Monte-Carlo fairness-gap bounds for either mechanism.

    Uses the exact identity that the sum projection is unbiased per entity,
    so each clamp bias equals the expected negative part of the projected
    entry; averaging negative parts gives far lower variance than averaging
    the clamped values themselves.
    """
    trials = check_trial_count(trials, 10_000)
    x = dataset.counts
    order = np.argsort(x, kind="stable")
    i_lo, i_hi = int(order[0]), int(order[-1])
    total = dataset.total

    def features(noisy):
        neg = -np.minimum(project_sum_rows(noisy, total), 0.0)
        return np.column_stack((neg[:, i_lo], neg[:, i_hi], neg.sum(axis=1))), 0

    moments = run_trials(x, spec, features, trials, check_seed(master_seed), workers)
    mean = moments.mean()
    first, last, negparts = float(mean[0]), float(mean[1]), float(mean[2])
    lower = first - last
    lower_se = moments.pair_diff_stderr(0, 1)
    upper_se = moments.linear_stderr(np.array([1.0, -1.0, 1.0]))
    data_range = float(x.max() - x.min())
    return BoundsReport(
        lower=lower,
        upper=min(data_range, lower + negparts),
        relu_bias_first=first,
        relu_bias_last=last,
        expected_negparts=negparts,
        data_range=data_range,
        method=BoundsMethod.MONTE_CARLO_EMPIRICAL,
        lower_stderr=lower_se,
        upper_stderr=upper_se,
    )


@dataclass(frozen=True)
class PairCheck:
    """One (i, j) pair's three bias-difference inequalities at 4 standard errors.

    ``diff`` is the estimated bias difference of the non-negative projection,
    ``clamp_diff`` the same for the plain clamp; inequality slots hold
    (margin, stderr, passed) with margin >= -4*stderr meaning pass.
    """

    entity_low: str
    entity_high: str
    count_low: float
    count_high: float
    diff: float
    clamp_diff: float
    lower_margin: float
    lower_stderr: float
    lower_ok: bool
    upper_margin: float
    upper_stderr: float
    upper_ok: bool
    range_margin: float
    range_stderr: float
    range_ok: bool


@dataclass(frozen=True)
class BiasDifferenceReport:
    pairs: tuple
    expected_threshold: float
    threshold_stderr: float
    trials: int
    all_ok: bool


def bias_difference_checks(
    dataset: TrueDataset,
    spec: NoiseSpec,
    trials: int = 100_000,
    master_seed: int = 0,
    workers: int = 1,
) -> BiasDifferenceReport:
    """Statistical test of the pairwise bias-difference inequalities.

    For entities sorted by true count ascending and every pair i < j:
    the non-negative projection's bias difference must be at least the plain
    clamp's (lower), at most the clamp's plus the expected threshold (upper),
    and at most the count gap (range), each checked at 4 standard errors.
    """
    trials = check_trial_count(trials, 10_000)
    x = dataset.counts
    n = x.size
    if 2 * n + 1 > SCATTER_WIDTH_CAP:
        raise ValueError("dataset too wide for pairwise covariance accumulation")
    order = np.argsort(x, kind="stable")
    total = dataset.total

    def features(noisy):
        base, projected, t = project_sum_nonneg_rows(noisy, total)
        # Per-trial difference between the two post-processings, evaluated in
        # its exact piecewise form (no cancellation): max(b-T,0) - max(b,0)
        # equals 0 for b <= 0, -b for 0 < b <= T, and -T for b > T.
        tcol = t[:, None]
        w = np.where(base <= 0.0, 0.0, np.where(base <= tcol, -base, -tcol))
        return np.column_stack((projected[:, order], w[:, order], t)), 0

    moments = run_trials(x, spec, features, trials, check_seed(master_seed), workers)
    mean = moments.mean()
    y_mean, w_mean, e_t = mean[:n], mean[n:2 * n], float(mean[2 * n])
    t_se = moments.stderr()[2 * n]
    xs = x[order]
    ids = [dataset.entity_ids[k] for k in order]
    coeffs = np.zeros(2 * n + 1)

    pairs = []
    all_ok = True
    for i in range(n):
        for j in range(i + 1, n):
            diff = float((y_mean[i] - xs[i]) - (y_mean[j] - xs[j]))
            clamp_diff = float((y_mean[i] - w_mean[i] - xs[i]) - (y_mean[j] - w_mean[j] - xs[j]))

            # (2a): diff - clamp_diff = E[w_i - w_j] >= 0
            stat_2a = float(w_mean[i] - w_mean[j])
            se_2a = moments.pair_diff_stderr(n + i, n + j)
            ok_2a = stat_2a >= -4.0 * se_2a

            # (2b): E[w_i - w_j - T] <= 0
            coeffs[:] = 0.0
            coeffs[n + i], coeffs[n + j], coeffs[2 * n] = 1.0, -1.0, -1.0
            stat_2b = stat_2a - e_t
            se_2b = moments.linear_stderr(coeffs)
            ok_2b = stat_2b <= 4.0 * se_2b

            # (3): diff <= x_j - x_i, i.e. E[y_i - y_j] <= 0
            stat_3 = float(y_mean[i] - y_mean[j])
            se_3 = moments.pair_diff_stderr(i, j)
            ok_3 = stat_3 <= 4.0 * se_3

            pairs.append(PairCheck(
                entity_low=ids[i], entity_high=ids[j],
                count_low=float(xs[i]), count_high=float(xs[j]),
                diff=diff, clamp_diff=clamp_diff,
                lower_margin=stat_2a, lower_stderr=se_2a, lower_ok=ok_2a,
                upper_margin=-stat_2b, upper_stderr=se_2b, upper_ok=ok_2b,
                range_margin=-stat_3, range_stderr=se_3, range_ok=ok_3,
            ))
            all_ok = all_ok and ok_2a and ok_2b and ok_3

    return BiasDifferenceReport(
        pairs=tuple(pairs),
        expected_threshold=e_t,
        threshold_stderr=float(t_se),
        trials=trials,
        all_ok=all_ok,
    )
