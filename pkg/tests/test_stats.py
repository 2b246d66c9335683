import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps
from scipy.special import ndtr, ndtri

from sepembed import targets
from sepembed.stats import ks_critical, ks_statistic, mean_stderr, target_cdf_pair


def test_ks_at_midpoint_quantiles_is_half_over_n():
    n = 500
    u = (np.arange(1, n + 1) - 0.5) / n
    np.testing.assert_allclose(ks_statistic(ndtri(u), ndtr), 1 / (2 * n), rtol=1e-10)


def test_ks_single_point_at_median():
    np.testing.assert_allclose(ks_statistic([0.0], ndtr), 0.5)


def test_ks_matches_scipy():
    x = np.random.default_rng(0).normal(size=300)
    np.testing.assert_allclose(ks_statistic(x, ndtr), sps.kstest(x, "norm").statistic, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 60))
def test_ks_equals_brute_force_sup(seed, n):
    x = np.sort(np.random.default_rng(seed).normal(size=n))
    grid = np.concatenate([np.linspace(-6, 6, 10_000), x, np.nextafter(x, -np.inf)])
    ecdf = np.searchsorted(x, grid, side="right") / n
    brute = np.max(np.abs(ecdf - ndtr(grid)))
    np.testing.assert_allclose(ks_statistic(x, ndtr), brute, atol=1e-12)


def test_ks_with_atoms_uses_left_limits():
    law = targets.two_point(1.0)
    F, left = target_cdf_pair(law)
    sample = np.array([-1.0] * 50 + [1.0] * 50)
    assert ks_statistic(sample, F, left) == 0.0
    sample = np.array([-1.0] * 30 + [1.0] * 70)
    np.testing.assert_allclose(ks_statistic(sample, F, left), 0.2, atol=1e-15)


def test_mean_stderr_and_critical_value():
    m, se = mean_stderr([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose([m, se], [2.5, np.std([1, 2, 3, 4], ddof=1) / 2])
    np.testing.assert_allclose(ks_critical(10_000, 0.95), 1.3581 / 100, rtol=1e-3)
