"""Kalman-family filters: hand values, linear equivalence, Eq-style model."""

import numpy as np
import pytest

from mixtrack.filters import (
    FilterModel,
    GaussianBeliefState,
    ekf_step,
    eq28_model,
    ukf_step,
)


def _linear_model(F, H, Q, R):
    F = np.atleast_2d(F)
    H = np.atleast_2d(H)
    return FilterModel(
        transition=lambda x: F @ x,
        transition_jacobian=lambda x: F,
        observation=lambda x: H @ x,
        observation_jacobian=lambda x: H,
        process_noise=Q,
        measurement_noise=R,
    )


def _kf_step(mean, cov, z, F, H, Q, R):
    """Textbook Kalman recursion for the oracle comparison."""
    mean_pred = F @ mean
    cov_pred = F @ cov @ F.T + Q
    if z is None:
        return mean_pred, cov_pred
    S = H @ cov_pred @ H.T + R
    K = cov_pred @ H.T @ np.linalg.inv(S)
    mean_new = mean_pred + K @ (z - H @ mean_pred)
    cov_new = (np.eye(len(mean)) - K @ H) @ cov_pred
    return mean_new, cov_new


def test_scalar_hand_posterior():
    # random-walk prior N(0, 1), Q = 1, R = 1, observation z = 2:
    # predicted variance 2, gain 2/3, posterior mean 4/3, variance 2/3
    model = _linear_model([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    state = GaussianBeliefState(np.zeros(1), np.eye(1))
    out = ekf_step(state, np.array([2.0]), model)
    assert abs(out.mean[0] - 4.0 / 3.0) < 1e-12
    assert abs(out.covariance[0, 0] - 2.0 / 3.0) < 1e-12


def test_ekf_matches_kf_on_linear_system():
    rng = np.random.default_rng(3)
    F = np.array([[1.0, 0.1], [0.0, 1.0]])
    H = np.array([[1.0, 0.0]])
    Q = np.diag([0.02, 0.05])
    R = np.array([[0.4]])
    model = _linear_model(F, H, Q, R)
    state = GaussianBeliefState(np.zeros(2), np.eye(2))
    mean, cov = np.zeros(2), np.eye(2)
    for _ in range(30):
        z = rng.normal(size=1)
        state = ekf_step(state, z, model)
        mean, cov = _kf_step(mean, cov, z, F, H, Q, R)
        np.testing.assert_allclose(state.mean, mean, atol=1e-12)
        np.testing.assert_allclose(state.covariance, cov, atol=1e-12)


def test_ukf_matches_kf_on_linear_system():
    rng = np.random.default_rng(4)
    F = np.array([[1.0, 0.2], [0.0, 0.9]])
    H = np.eye(2)
    Q = np.diag([0.1, 0.1])
    R = np.diag([0.3, 0.5])
    model = _linear_model(F, H, Q, R)
    state = GaussianBeliefState(np.array([1.0, -1.0]), 2.0 * np.eye(2))
    mean, cov = np.array([1.0, -1.0]), 2.0 * np.eye(2)
    for _ in range(20):
        z = rng.normal(size=2)
        state = ukf_step(state, z, model)
        mean, cov = _kf_step(mean, cov, z, F, H, Q, R)
        np.testing.assert_allclose(state.mean, mean, atol=1e-8)
        np.testing.assert_allclose(state.covariance, cov, atol=1e-8)


def test_prediction_only_step():
    F = np.array([[1.0, 1.0], [0.0, 1.0]])
    model = _linear_model(F, np.eye(2), 0.1 * np.eye(2), np.eye(2))
    state = GaussianBeliefState(np.array([0.0, 1.0]), np.eye(2))
    for step_fn in (ekf_step, ukf_step):
        out = step_fn(state, None, model)
        np.testing.assert_allclose(out.mean, [1.0, 1.0], atol=1e-8)
        want_cov = F @ np.eye(2) @ F.T + 0.1 * np.eye(2)
        np.testing.assert_allclose(out.covariance, want_cov, atol=1e-8)


def test_nonlinear_ekf_uses_jacobian():
    model = FilterModel(
        transition=lambda x: np.array([x[0] ** 2]),
        transition_jacobian=lambda x: np.array([[2.0 * x[0]]]),
        observation=lambda x: x,
        observation_jacobian=lambda x: np.eye(1),
        process_noise=np.array([[0.0]]),
        measurement_noise=np.array([[1.0]]),
    )
    state = GaussianBeliefState(np.array([3.0]), np.array([[0.5]]))
    out = ekf_step(state, None, model)
    assert abs(out.mean[0] - 9.0) < 1e-12
    assert abs(out.covariance[0, 0] - 36.0 * 0.5) < 1e-12


def test_tracking_model_noise_free_step():
    # dt = 0.1 from (0, 10, 0): x1 advances by 2 * 10 * 0.1 = 2
    model = eq28_model(0.1)
    nxt = model.transition(np.array([0.0, 10.0, 0.0]))
    np.testing.assert_allclose(nxt, [2.0, 10.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(
        model.observation(np.array([1.0, 2.0, 3.0])), [1.0, 2.0], atol=1e-15
    )


def test_tracking_model_default_noise_moments():
    model = eq28_model(0.1)
    np.testing.assert_allclose(
        np.diag(model.process_noise), [0.5, 1.0 / 3.0, 1.0 / 300.0], atol=1e-15
    )
    np.testing.assert_allclose(np.diag(model.measurement_noise), [0.5, 0.5])
    with pytest.raises(ValueError):
        eq28_model(0.0)
