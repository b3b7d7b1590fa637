import numpy as np
import pytest

from lambert_sb.simulate import ensemble_statistics, endpoint_statistics, propagate, sample_initial

MU0 = np.array([5000.0, 10000.0, 2100.0])
COV0 = np.diag(MU0**2) / 100


def zero_field(r, t):
    return np.zeros_like(r)


def test_degenerate_covariance():
    x = sample_initial(MU0, np.zeros((3, 3)), 5, seed=1)
    assert np.all(x == MU0)


def test_sampling_is_deterministic():
    np.testing.assert_array_equal(sample_initial(MU0, COV0, 10, 7), sample_initial(MU0, COV0, 10, 7))
    assert not np.array_equal(sample_initial(MU0, COV0, 10, 7), sample_initial(MU0, COV0, 10, 8))


def test_sample_mean_within_three_standard_errors():
    x = sample_initial(MU0, COV0, 100_000, seed=2024)
    se = np.sqrt(np.diag(COV0) / x.shape[0])
    assert np.all(np.abs(x.mean(axis=0) - MU0) < 3 * se)


def test_sampling_rejects_bad_covariance():
    with pytest.raises(ValueError):
        sample_initial(MU0, -COV0, 3, 0)
    with pytest.raises(ValueError):
        sample_initial(MU0, np.eye(2), 3, 0)


def test_still_paths_without_noise():
    x0 = sample_initial(MU0, COV0, 4, 0)
    paths = propagate(x0, zero_field, 0.0, 10.0, (0.0, 100.0), 0)
    assert paths.states.shape == (4, 11, 3)
    assert np.all(paths.states == x0[:, None, :])


def test_constant_drift_exact():
    c = np.array([1.5, -2.0, 0.25])
    paths = propagate(np.zeros((2, 3)), lambda r, t: np.broadcast_to(c, r.shape), 0.0, 2.0, (0.0, 20.0), 0)
    k = np.arange(11)
    np.testing.assert_allclose(paths.states[0], k[:, None] * 2.0 * c, rtol=1e-15)
    np.testing.assert_array_equal(paths.times, 2.0 * k)
    st = endpoint_statistics(paths)
    np.testing.assert_allclose(st.mean, 20.0 * c)
    assert np.all(st.covariance == 0)


def test_brownian_variance_growth():
    eps, horizon, n = 50.0, 100.0, 10_000
    x0 = sample_initial(np.zeros(3), np.eye(3) * 4.0, n, 11)
    paths = propagate(x0, zero_field, eps, 5.0, (0.0, horizon), 11)
    var = paths.states[:, -1].var(axis=0, ddof=1)
    expected = 4.0 + 2 * eps * horizon
    # standard error of a sample variance is about var * sqrt(2 / (n - 1))
    assert np.all(np.abs(var - expected) < 5 * expected * np.sqrt(2 / (n - 1)))


def test_seed_reproducibility_and_path_independence():
    x0 = np.zeros((3, 3))
    a = propagate(x0, zero_field, 1.0, 1.0, (0.0, 5.0), 42)
    b = propagate(x0, zero_field, 1.0, 1.0, (0.0, 5.0), 42)
    np.testing.assert_array_equal(a.states, b.states)
    # path p draws from its own stream, so adding paths leaves earlier ones unchanged
    c = propagate(np.zeros((5, 3)), zero_field, 1.0, 1.0, (0.0, 5.0), 42)
    np.testing.assert_array_equal(c.states[:3], a.states)


def test_zero_paths():
    paths = propagate(np.zeros((0, 3)), zero_field, 1.0, 1.0, (0.0, 3.0), 0)
    assert paths.n_paths == 0 and paths.states.shape == (0, 4, 3)


def test_propagate_argument_checks():
    with pytest.raises(ValueError):
        propagate(np.zeros((1, 3)), zero_field, 1.0, 0.7, (0.0, 1.0), 0)
    with pytest.raises(ValueError):
        propagate(np.zeros((1, 3)), zero_field, -1.0, 0.5, (0.0, 1.0), 0)
    with pytest.raises(FloatingPointError):
        propagate(np.zeros((1, 3)), lambda r, t: np.full_like(r, np.inf), 0.0, 0.5, (0.0, 1.0), 0)


def test_ensemble_statistics():
    a = np.array([1.0, -2.0, 3.0])
    st = ensemble_statistics(np.stack([a, -a]))
    np.testing.assert_allclose(st.mean, 0.0)
    np.testing.assert_allclose(st.covariance, 2 * np.outer(a, a))
    same = ensemble_statistics(np.tile(a, (4, 1)))
    assert np.all(same.covariance == 0)
    with pytest.raises(ValueError):
        ensemble_statistics(a[None, :])
