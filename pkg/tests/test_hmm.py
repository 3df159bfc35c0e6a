"""Gaussian HMM forward pass and Baum-Welch fitting."""

import itertools

import numpy as np
import pytest

from mixtrack.errors import DimensionMismatch
from mixtrack.hmm import (
    GaussianHmm,
    hmm_fit_baum_welch,
    hmm_forward_loglik,
    hmm_prefix_logliks,
    hmm_windowed_logliks,
    select_hidden_states_bic,
)


def _random_hmm(rng, n_states, dim):
    initial = rng.random(n_states) + 0.2
    initial /= initial.sum()
    transition = rng.random((n_states, n_states)) + 0.2
    transition /= transition.sum(axis=1, keepdims=True)
    means = rng.normal(0.0, 2.0, size=(n_states, dim))
    variances = rng.uniform(0.3, 2.0, size=(n_states, dim))
    return GaussianHmm(initial, transition, means, variances)


def _path_enumeration_loglik(hmm, seq):
    """Brute-force likelihood by summing over every hidden state path."""
    loge = hmm.log_emissions(seq)
    T, S = loge.shape
    total = 0.0
    for path in itertools.product(range(S), repeat=T):
        logp = np.log(hmm.initial[path[0]]) + loge[0, path[0]]
        for t in range(1, T):
            logp += np.log(hmm.transition[path[t - 1], path[t]]) + loge[t, path[t]]
        total += np.exp(logp)
    return np.log(total)


def test_forward_matches_path_enumeration():
    rng = np.random.default_rng(2)
    for n_states in (1, 2, 3):
        for length in (1, 3, 5, 7):
            hmm = _random_hmm(rng, n_states, 2)
            seq = rng.normal(size=(length, 2))
            exact = _path_enumeration_loglik(hmm, seq)
            got = hmm_forward_loglik(hmm, seq)
            assert abs(got - exact) <= 1e-10 * max(abs(exact), 1.0)


def test_single_state_standard_normal_value():
    # one state, N(0, 1) emissions, observations [0, 0]: each frame
    # contributes -0.5 log(2 pi), total -log(2 pi)
    hmm = GaussianHmm([1.0], [[1.0]], [[0.0]], [[1.0]])
    ll = hmm_forward_loglik(hmm, np.zeros((2, 1)))
    assert abs(ll - (-np.log(2.0 * np.pi))) < 1e-12


def test_emission_dimension_checked():
    hmm = GaussianHmm([1.0], [[1.0]], [[0.0, 0.0]], [[1.0, 1.0]])
    with pytest.raises(DimensionMismatch):
        hmm.log_emissions(np.zeros((4, 3)))


def test_windowed_logliks_match_per_slice_forward():
    rng = np.random.default_rng(5)
    hmm = _random_hmm(rng, 3, 2)
    seq = rng.normal(size=(30, 2))
    window = 6
    batched = hmm_windowed_logliks(hmm, seq, window)
    for i, got in enumerate(batched):
        assert abs(got - hmm_forward_loglik(hmm, seq[i : i + window])) < 1e-9


def test_windowed_logliks_uniform_initial():
    rng = np.random.default_rng(6)
    hmm = _random_hmm(rng, 2, 1)
    seq = rng.normal(size=(10, 1))
    uniform = GaussianHmm(
        np.full(2, 0.5), hmm.transition, hmm.means, hmm.variances
    )
    got = hmm_windowed_logliks(hmm, seq, 4, uniform_initial=True)
    want = hmm_windowed_logliks(uniform, seq, 4)
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_windowed_logliks_too_short_raises():
    hmm = GaussianHmm([1.0], [[1.0]], [[0.0]], [[1.0]])
    with pytest.raises(DimensionMismatch):
        hmm_windowed_logliks(hmm, np.zeros((4, 1)), 4)


def test_prefix_logliks_match_forward():
    rng = np.random.default_rng(7)
    hmm = _random_hmm(rng, 3, 2)
    seq = rng.normal(size=(25, 2))
    prefixes = hmm_prefix_logliks(hmm, seq)
    for t in (0, 1, 7, 24):
        assert abs(prefixes[t] - hmm_forward_loglik(hmm, seq[: t + 1])) < 1e-8


def test_baum_welch_monotone_loglik():
    rng = np.random.default_rng(9)
    for trial in range(20):
        n_states = int(rng.integers(1, 4))
        seqs = [
            rng.normal(size=(int(rng.integers(20, 40)), 2)) + rng.normal(0, 2)
            for _ in range(3)
        ]
        hmm = hmm_fit_baum_welch(
            seqs, n_states, max_iters=40, seed=trial, restarts=1
        )
        trace = np.array(hmm.loglik_trace)
        assert len(trace) >= 2
        assert np.all(np.diff(trace) >= -1e-8 * np.maximum(np.abs(trace[:-1]), 1.0))


def test_baum_welch_recovers_separated_states():
    rng = np.random.default_rng(10)
    # two well-separated emission regimes with sticky transitions
    seqs = []
    for _ in range(5):
        states = [0]
        for _ in range(59):
            states.append(states[-1] if rng.random() < 0.9 else 1 - states[-1])
        obs = np.array([[rng.normal(0.0 if s == 0 else 8.0, 0.5)] for s in states])
        seqs.append(obs)
    hmm = hmm_fit_baum_welch(seqs, 2, seed=0, restarts=3)
    means = np.sort(hmm.means[:, 0])
    assert abs(means[0] - 0.0) < 0.5
    assert abs(means[1] - 8.0) < 0.5


def test_baum_welch_needs_enough_frames():
    with pytest.raises(ValueError):
        hmm_fit_baum_welch([np.zeros((5, 1))], 2)


def test_baum_welch_constant_data_warns():
    with pytest.warns(UserWarning):
        hmm_fit_baum_welch([np.zeros((30, 1))], 1, max_iters=2, restarts=1)


def test_select_hidden_states_bic_prefers_true_count():
    rng = np.random.default_rng(12)
    seqs = [
        np.concatenate(
            [rng.normal(0.0, 0.3, 40), rng.normal(6.0, 0.3, 40)]
        )[:, None]
        for _ in range(3)
    ]
    chosen = select_hidden_states_bic(seqs, [1, 2, 3], seed=0)
    assert chosen == 2
    assert select_hidden_states_bic(seqs, [4]) == 4
    with pytest.raises(ValueError):
        select_hidden_states_bic(seqs, [])
