"""Weight bookkeeping, resampling and mixture container invariants."""

import numpy as np
import pytest

from mixtrack.belief import (
    FeasibleRegion,
    MixtureBelief,
    MixtureComponent,
    ObservationFrame,
    belief_summary,
    effective_sample_size,
    empirical_moments,
    normalize_weights,
    systematic_resample,
    uniform_component,
)
from mixtrack.errors import AllZeroWeights


def test_normalize_weights_hand_value():
    w = normalize_weights(np.array([0.3, 0.1]))
    np.testing.assert_allclose(w, [0.75, 0.25], atol=1e-15)


def test_normalize_weights_sum_to_one_random():
    rng = np.random.default_rng(1)
    for _ in range(20):
        w = normalize_weights(rng.random(50))
        assert abs(w.sum() - 1.0) < 1e-12


def test_normalize_weights_all_zero_raises():
    with pytest.raises(AllZeroWeights):
        normalize_weights(np.zeros(4))


def test_normalize_weights_underflow_raises():
    with pytest.raises(AllZeroWeights):
        normalize_weights(np.full(3, 1e-310))


def test_normalize_weights_negative_raises():
    with pytest.raises(ValueError):
        normalize_weights(np.array([0.5, -0.1]))


def test_effective_sample_size_hand_value():
    ess = effective_sample_size(np.array([0.5, 0.25, 0.25]))
    assert abs(ess - 8.0 / 3.0) < 1e-12


def test_effective_sample_size_extremes():
    n = 64
    uniform = np.full(n, 1.0 / n)
    assert abs(effective_sample_size(uniform) - n) < 1e-9
    point = np.zeros(n)
    point[3] = 1.0
    assert abs(effective_sample_size(point) - 1.0) < 1e-12


def test_systematic_resample_unbiased_counts():
    # offspring count of each atom should match n * w_i at the 3 sigma
    # level over many independent resampling passes
    rng = np.random.default_rng(7)
    w = np.array([0.5, 0.3, 0.15, 0.05])
    n = 10
    trials = 100_000
    counts = np.zeros(len(w))
    for _ in range(trials):
        idx = systematic_resample(w, n, rng)
        counts += np.bincount(idx, minlength=len(w))
    expected = trials * n * w
    # systematic resampling: per-trial count is within 1 of n*w_i, so the
    # variance is bounded by that of a Bernoulli on the fractional part
    frac = (n * w) - np.floor(n * w)
    sigma = np.sqrt(np.maximum(frac * (1 - frac), 1e-12) * trials)
    assert np.all(np.abs(counts - expected) <= 3.0 * sigma + 1e-9)


def test_systematic_resample_deterministic_weights():
    # integer expected counts leave nothing to chance
    rng = np.random.default_rng(0)
    idx = systematic_resample(np.array([0.5, 0.5]), 4, rng)
    assert sorted(np.bincount(idx, minlength=2)) == [2, 2]


def test_empirical_moments_hand_value():
    comp = MixtureComponent(
        id=0,
        pi=1.0,
        states=np.array([[0.0], [4.0]]),
        weights=np.array([0.75, 0.25]),
    )
    mean, cov = empirical_moments(comp)
    assert abs(mean[0] - 1.0) < 1e-12
    assert abs(cov[0, 0] - 3.0) < 1e-12


def test_feasible_region_box_and_predicate():
    region = FeasibleRegion(np.array([0.0, -1.0]), np.array([1.0, 1.0]))
    states = np.array([[0.5, 0.0], [1.5, 0.0], [0.5, -2.0]])
    np.testing.assert_array_equal(region.contains(states), [True, False, False])
    odd = FeasibleRegion(
        np.array([-np.inf]), np.array([np.inf]),
        extra_predicate=lambda s: s[0] > 0,
    )
    np.testing.assert_array_equal(
        odd.contains(np.array([[1.0], [-1.0]])), [True, False]
    )


def test_feasible_region_bad_bounds():
    with pytest.raises(ValueError):
        FeasibleRegion(np.array([1.0]), np.array([0.0]))


def test_observation_frame_len_and_negative_step():
    frame = ObservationFrame(3, (np.zeros(2), np.ones(2)))
    assert len(frame) == 2
    assert len(ObservationFrame(0)) == 0
    with pytest.raises(ValueError):
        ObservationFrame(-1)


def test_component_validate_catches_bad_weights():
    comp = uniform_component(0, 1.0, np.zeros((10, 2)))
    comp.validate()
    comp.weights = comp.weights * 2.0
    with pytest.raises(ValueError):
        comp.validate()


def test_belief_copy_is_deep():
    comp = uniform_component(0, 1.0, np.zeros((5, 2)))
    belief = MixtureBelief(0, [comp])
    clone = belief.copy()
    clone.components[0].states[:] = 7.0
    assert np.all(belief.components[0].states == 0.0)


def test_belief_summary_orders_by_weight():
    rng = np.random.default_rng(3)
    a = uniform_component(0, 0.2, rng.normal(size=(20, 2)))
    b = uniform_component(1, 0.8, rng.normal(size=(20, 2)) + 5.0)
    summary = belief_summary(MixtureBelief(0, [a, b]))
    ids = [entry["id"] for entry in summary["components"]]
    assert ids[0] == 1
