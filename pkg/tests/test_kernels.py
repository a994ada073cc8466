import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rmhng.errors import DegenerateDistributionError, NotPositiveDefiniteError
from rmhng.kernels import (
    GaussianParams,
    RngStream,
    cholesky,
    log_gaussian_density,
    sample_categorical,
    sample_categorical_log,
    sample_gaussian,
    sample_wishart,
)


def _mp_log_density(x, mean, precision):
    """Multivariate normal log-density in 50-digit arithmetic."""
    mpmath.mp.dps = 50
    L = mpmath.matrix(precision.tolist())
    diff = mpmath.matrix((np.asarray(x) - mean).tolist())
    quad = (diff.T * L * diff)[0]
    k = len(mean)
    return float(0.5 * mpmath.log(mpmath.det(L)) - 0.5 * k * mpmath.log(2 * mpmath.pi) - 0.5 * quad)


def _random_spd(rng, dim):
    a = rng.normal(size=(dim, dim))
    return a @ a.T + dim * np.eye(dim)


def test_standard_normal_at_zero():
    p = GaussianParams(np.zeros(1), np.eye(1))
    assert log_gaussian_density(np.zeros(1), p) == pytest.approx(-0.9189385332046727, abs=1e-15)


def test_unit_offset_density_ratio():
    # the MH ratio of two unit-precision components at x=0 with means 1 and 0
    a = log_gaussian_density(np.zeros(1), GaussianParams(np.ones(1), np.eye(1)))
    b = log_gaussian_density(np.zeros(1), GaussianParams(np.zeros(1), np.eye(1)))
    assert np.exp(a - b) == pytest.approx(0.6065306597126334, rel=1e-14)


@pytest.mark.parametrize("dim", [1, 2, 3, 5])
def test_density_matches_mpmath(dim):
    rng = np.random.default_rng(dim)
    for _ in range(5):
        precision = _random_spd(rng, dim)
        mean = rng.normal(size=dim)
        x = mean + rng.normal(size=dim) * 3
        got = log_gaussian_density(x, GaussianParams(mean, precision))
        assert got == pytest.approx(_mp_log_density(x, mean, precision), rel=1e-10, abs=1e-10)


def test_density_batches_rows():
    rng = np.random.default_rng(0)
    p = GaussianParams(rng.normal(size=3), _random_spd(rng, 3))
    x = rng.normal(size=(7, 3))
    batch = log_gaussian_density(x, p)
    assert batch.shape == (7,)
    np.testing.assert_allclose(batch, [log_gaussian_density(row, p) for row in x])


def test_density_dimension_mismatch():
    with pytest.raises(ValueError):
        log_gaussian_density(np.zeros(3), GaussianParams(np.zeros(2), np.eye(2)))


def test_non_pd_precision_raises_typed_error():
    with pytest.raises(NotPositiveDefiniteError):
        GaussianParams(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(NotPositiveDefiniteError):
        cholesky(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_categorical_chi_square():
    weights = np.array([0.1, 0.2, 0.3, 0.4])
    draws = sample_categorical(weights, RngStream(1), size=100_000)
    counts = np.bincount(draws, minlength=4)
    _, p = stats.chisquare(counts, weights * draws.size)
    assert p > 1e-3


def test_categorical_log_rows_chi_square():
    rng = RngStream(2)
    probs = np.array([0.5, 0.3, 0.2])
    table = np.tile(np.log(probs) - 700.0, (50_000, 1))  # far below exp underflow
    draws = sample_categorical_log(table, rng)
    _, p = stats.chisquare(np.bincount(draws, minlength=3), probs * draws.size)
    assert p > 1e-3


def test_categorical_rejects_degenerate_weights():
    for bad in ([0.0, 0.0], [1.0, -0.5], [np.inf, 1.0], []):
        with pytest.raises(DegenerateDistributionError):
            sample_categorical(np.array(bad), RngStream(0))
    with pytest.raises(DegenerateDistributionError):
        sample_categorical_log(np.full((2, 3), -np.inf), RngStream(0))


def test_categorical_zero_weight_never_drawn():
    draws = sample_categorical(np.array([0.0, 1.0, 0.0]), RngStream(3), size=1000)
    assert np.all(draws == 1)


@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=8).filter(lambda w: sum(w) > 0), st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_categorical_in_support(weights, seed):
    weights = np.array(weights)
    draws = sample_categorical(weights, RngStream(seed), size=50)
    assert np.all((draws >= 0) & (draws < weights.size))
    assert np.all(weights[draws] > 0)


def test_gaussian_sample_moments():
    rng = np.random.default_rng(5)
    precision = _random_spd(rng, 3)
    mean = np.array([1.0, -2.0, 0.5])
    x = sample_gaussian(GaussianParams(mean, precision), RngStream(5), size=200_000)
    np.testing.assert_allclose(x.mean(axis=0), mean, atol=0.01)
    np.testing.assert_allclose(np.cov(x.T), np.linalg.inv(precision), atol=0.01)


def test_wishart_moments():
    scale = np.array([[2.0, 0.3], [0.3, 0.5]])
    nu = 5.0
    draws = sample_wishart(nu, scale, RngStream(6), size=100_000)
    assert draws.shape == (100_000, 2, 2)
    np.testing.assert_allclose(draws.mean(axis=0), nu * scale, rtol=0.02)
    # Var(L_ij) = nu (W_ij^2 + W_ii W_jj)
    var = nu * (scale**2 + np.outer(np.diag(scale), np.diag(scale)))
    np.testing.assert_allclose(draws.var(axis=0), var, rtol=0.05)
    assert np.all(np.linalg.eigvalsh(draws) > 0)


def test_wishart_matches_scipy_distribution():
    scale = np.array([[1.0, 0.4], [0.4, 2.0]])
    ours = sample_wishart(4.0, scale, RngStream(7), size=20_000)[:, 0, 0]
    ref = stats.wishart(df=4.0, scale=scale).rvs(20_000, random_state=7)[:, 0, 0]
    assert stats.ks_2samp(ours, ref).pvalue > 1e-3


def test_wishart_rejects_low_dof():
    with pytest.raises(ValueError):
        sample_wishart(1.0, np.eye(3), RngStream(0))


def test_rng_stream_reproducible_and_independent():
    a = RngStream(42).spawn(1, 2).uniform(5)
    b = RngStream(42).spawn(1, 2).uniform(5)
    c = RngStream(42).spawn(1, 3).uniform(5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    # creating sibling streams first does not shift a stream
    root = RngStream(42)
    root.spawn(9).uniform(100)
    np.testing.assert_array_equal(root.spawn(1, 2).uniform(5), a)


def test_rng_stream_seed_range():
    RngStream(2**64 - 1)
    for bad in (-1, 2**64):
        with pytest.raises(ValueError):
            RngStream(bad)
