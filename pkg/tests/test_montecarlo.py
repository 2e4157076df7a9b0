import numpy as np
import pytest

from dp_postfair.mechanisms import NoiseSpec
from dp_postfair.montecarlo import run_trials

COUNTS = np.array([3.0, 8.0, 20.0])
SPEC = NoiseSpec("laplace", 5.0)


def identity_features(noisy):
    return noisy, 0


def test_worker_count_never_changes_results():
    base = run_trials(COUNTS, SPEC, identity_features, 30_000, 42, workers=1)
    for workers in (2, 8):
        other = run_trials(COUNTS, SPEC, identity_features, 30_000, 42, workers=workers)
        np.testing.assert_array_equal(base.sums, other.sums)
        np.testing.assert_array_equal(base.sumsq, other.sumsq)
        np.testing.assert_array_equal(base.scatter, other.scatter)
        assert base.trials == other.trials


def test_repeat_runs_bit_identical():
    a = run_trials(COUNTS, SPEC, identity_features, 10_000, 7)
    b = run_trials(COUNTS, SPEC, identity_features, 10_000, 7)
    np.testing.assert_array_equal(a.sums, b.sums)


def test_moments_match_naive_loop():
    from dp_postfair.core import TrialStreams
    from dp_postfair.mechanisms import noisy_rows

    trials = 5000
    m = run_trials(COUNTS, SPEC, identity_features, trials, 3, chunk_trials=700)
    rows = noisy_rows(COUNTS, SPEC, TrialStreams(3), 0, trials)
    np.testing.assert_allclose(m.mean(), rows.mean(axis=0), rtol=1e-12)
    sample_se = rows.std(axis=0, ddof=1) / np.sqrt(trials)
    np.testing.assert_allclose(m.stderr(), sample_se, rtol=1e-9)


def test_linear_stderr_matches_direct():
    trials = 4000
    m = run_trials(COUNTS, SPEC, identity_features, trials, 5)
    from dp_postfair.core import TrialStreams
    from dp_postfair.mechanisms import noisy_rows

    rows = noisy_rows(COUNTS, SPEC, TrialStreams(5), 0, trials)
    coeffs = np.array([1.0, -2.0, 0.5])
    direct = (rows @ coeffs).std(ddof=1) / np.sqrt(trials)
    assert m.linear_stderr(coeffs) == pytest.approx(direct, rel=1e-9)
    assert m.pair_diff_stderr(0, 2) == pytest.approx(
        (rows[:, 0] - rows[:, 2]).std(ddof=1) / np.sqrt(trials), rel=1e-9
    )


def test_no_scatter_fallback_is_conservative():
    m = run_trials(COUNTS, SPEC, identity_features, 4000, 5, with_scatter=False)
    assert m.scatter is None
    se = m.stderr()
    assert m.pair_diff_stderr(0, 2) == pytest.approx(se[0] + se[2])
    with pytest.raises(ValueError, match="cross moments"):
        m.linear_stderr(np.array([1.0, 0.0, -1.0]))


def test_extra_counters_accumulate():
    def counting(noisy):
        return noisy, (noisy.shape[0], 1)

    m = run_trials(COUNTS, SPEC, counting, 20_000, 1, chunk_trials=512)
    assert m.extra[0] == 20_000
    assert m.extra[1] == int(np.ceil(20_000 / 512))


def test_argument_validation():
    with pytest.raises(ValueError):
        run_trials(COUNTS, SPEC, identity_features, 0, 1)
    with pytest.raises(ValueError):
        run_trials(COUNTS, SPEC, identity_features, 100, 1, workers=0)
