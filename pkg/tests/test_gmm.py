"""Gaussian mixture density, sampling and EM fitting."""

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from mixtrack.gmm import (
    Gmm,
    gaussian_logpdf,
    gmm_bic,
    gmm_fit_em,
    gmm_loglik,
    gmm_sample,
)


def _random_gmm(rng, n_components, dim):
    weights = rng.random(n_components) + 0.2
    weights /= weights.sum()
    means = rng.normal(0.0, 3.0, size=(n_components, dim))
    covs = np.empty((n_components, dim, dim))
    for g in range(n_components):
        a = rng.normal(size=(dim, dim))
        covs[g] = a @ a.T + 0.5 * np.eye(dim)
    return Gmm(weights, means, covs)


def test_gaussian_logpdf_matches_scipy():
    rng = np.random.default_rng(1)
    mean = rng.normal(size=3)
    a = rng.normal(size=(3, 3))
    cov = a @ a.T + 0.5 * np.eye(3)
    x = rng.normal(size=(20, 3))
    got = gaussian_logpdf(x, mean, cov)
    want = multivariate_normal(mean, cov).logpdf(x)
    np.testing.assert_allclose(got, want, atol=1e-9)


def test_gmm_loglik_matches_manual_mixture():
    rng = np.random.default_rng(2)
    gmm = _random_gmm(rng, 3, 2)
    x = rng.normal(size=(50, 2))
    dens = np.zeros(len(x))
    for w, mu, cov in zip(gmm.weights, gmm.means, gmm.covariances):
        dens += w * multivariate_normal(mu, cov).pdf(x)
    assert abs(gmm_loglik(gmm, x) - np.log(dens).sum()) < 1e-8


def test_gmm_sample_moments():
    rng = np.random.default_rng(3)
    gmm = Gmm(
        weights=np.array([0.3, 0.7]),
        means=np.array([[0.0, 0.0], [4.0, -2.0]]),
        covariances=np.array([np.eye(2), 2.0 * np.eye(2)]),
    )
    draws = gmm_sample(gmm, 200_000, rng)
    want_mean = 0.3 * gmm.means[0] + 0.7 * gmm.means[1]
    np.testing.assert_allclose(draws.mean(axis=0), want_mean, atol=0.03)


def test_em_monotone_loglik():
    rng = np.random.default_rng(4)
    for trial in range(20):
        n_components = int(rng.integers(1, 4))
        data = np.vstack(
            [
                rng.normal(rng.normal(0, 4), rng.uniform(0.5, 2.0), size=(40, 2))
                for _ in range(3)
            ]
        )
        gmm = gmm_fit_em(data, n_components, max_iters=60, seed=trial, restarts=1)
        trace = np.array(gmm.loglik_trace)
        assert len(trace) >= 2
        assert np.all(np.diff(trace) >= -1e-8 * np.maximum(np.abs(trace[:-1]), 1.0))


def test_em_recovers_separated_clusters():
    rng = np.random.default_rng(5)
    data = np.vstack(
        [
            rng.normal([0.0, 0.0], 0.4, size=(200, 2)),
            rng.normal([8.0, 8.0], 0.4, size=(200, 2)),
        ]
    )
    gmm = gmm_fit_em(data, 2, seed=1)
    order = np.argsort(gmm.means[:, 0])
    np.testing.assert_allclose(gmm.means[order[0]], [0.0, 0.0], atol=0.2)
    np.testing.assert_allclose(gmm.means[order[1]], [8.0, 8.0], atol=0.2)
    np.testing.assert_allclose(np.sort(gmm.weights), [0.5, 0.5], atol=0.05)


def test_em_needs_enough_samples():
    with pytest.raises(ValueError):
        gmm_fit_em(np.zeros((15, 2)), 2)


def test_bic_penalizes_extra_components():
    rng = np.random.default_rng(6)
    data = rng.normal(size=(400, 2))
    one = gmm_fit_em(data, 1, seed=0, restarts=1)
    four = gmm_fit_em(data, 4, seed=0, restarts=1)
    assert gmm_bic(one, data) < gmm_bic(four, data)
