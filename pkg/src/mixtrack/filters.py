"""Kalman-family baseline filters.

EKF with user-supplied Jacobians and a 2d+1 sigma-point UKF, both over a
generic differentiable process/measurement model. On linear models the
EKF is the exact Kalman filter and the UKF matches it to transform
accuracy, which the tests pin down.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import SingularCovariance

FILTER_JITTER = 1e-12


@dataclass
class GaussianBeliefState:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        self.covariance = 0.5 * (cov + cov.T)


@dataclass
class FilterModel:
    transition: Callable[[np.ndarray], np.ndarray]
    transition_jacobian: Callable[[np.ndarray], np.ndarray]
    observation: Callable[[np.ndarray], np.ndarray]
    observation_jacobian: Callable[[np.ndarray], np.ndarray]
    process_noise: np.ndarray  # Q
    measurement_noise: np.ndarray  # R

    def __post_init__(self):
        self.process_noise = np.atleast_2d(np.asarray(self.process_noise, dtype=float))
        self.measurement_noise = np.atleast_2d(
            np.asarray(self.measurement_noise, dtype=float)
        )


def ekf_step(
    state: GaussianBeliefState,
    observation: Optional[np.ndarray],
    model: FilterModel,
) -> GaussianBeliefState:
    """Jacobian-propagated predict, then Kalman update.

    observation=None performs the pure prediction step.
    """
    F = np.atleast_2d(model.transition_jacobian(state.mean))
    mean_pred = np.asarray(model.transition(state.mean), dtype=float)
    cov_pred = F @ state.covariance @ F.T + model.process_noise
    if observation is None:
        return GaussianBeliefState(mean_pred, cov_pred)

    H = np.atleast_2d(model.observation_jacobian(mean_pred))
    innov = np.asarray(observation, dtype=float) - model.observation(mean_pred)
    S = H @ cov_pred @ H.T + model.measurement_noise
    S = 0.5 * (S + S.T)
    try:
        gain = np.linalg.solve(S, H @ cov_pred).T
    except np.linalg.LinAlgError:
        S += FILTER_JITTER * np.eye(S.shape[0])
        gain = np.linalg.solve(S, H @ cov_pred).T
    mean = mean_pred + gain @ innov
    cov = (np.eye(len(mean)) - gain @ H) @ cov_pred
    return GaussianBeliefState(mean, cov)


def _sigma_points(mean, cov, alpha, beta, kappa):
    d = len(mean)
    lam = alpha * alpha * (d + kappa) - d
    scaled = (d + lam) * cov
    try:
        sqrt = np.linalg.cholesky(scaled)
    except np.linalg.LinAlgError:
        try:
            sqrt = np.linalg.cholesky(scaled + 1e-9 * np.eye(d))
        except np.linalg.LinAlgError as e:
            raise SingularCovariance(f"sigma point sqrt failed: {e}") from e
    points = np.vstack([mean, mean + sqrt.T, mean - sqrt.T])
    w_mean = np.full(2 * d + 1, 0.5 / (d + lam))
    w_cov = w_mean.copy()
    w_mean[0] = lam / (d + lam)
    w_cov[0] = w_mean[0] + (1.0 - alpha * alpha + beta)
    return points, w_mean, w_cov


def ukf_step(
    state: GaussianBeliefState,
    observation: Optional[np.ndarray],
    model: FilterModel,
    alpha: float = 1e-3,
    beta: float = 2.0,
    kappa: float = 0.0,
) -> GaussianBeliefState:
    """Unscented predict/update with 2d+1 sigma points."""
    points, w_mean, w_cov = _sigma_points(
        state.mean, state.covariance, alpha, beta, kappa
    )
    prop = np.array([model.transition(p) for p in points])
    mean_pred = w_mean @ prop
    diff = prop - mean_pred
    cov_pred = (diff * w_cov[:, None]).T @ diff + model.process_noise
    if observation is None:
        return GaussianBeliefState(mean_pred, cov_pred)

    points, w_mean, w_cov = _sigma_points(mean_pred, cov_pred, alpha, beta, kappa)
    obs_pts = np.array([model.observation(p) for p in points])
    obs_mean = w_mean @ obs_pts
    obs_diff = obs_pts - obs_mean
    state_diff = points - mean_pred
    S = (obs_diff * w_cov[:, None]).T @ obs_diff + model.measurement_noise
    S = 0.5 * (S + S.T)
    cross = (state_diff * w_cov[:, None]).T @ obs_diff
    gain = np.linalg.solve(S, cross.T).T
    innov = np.asarray(observation, dtype=float) - obs_mean
    mean = mean_pred + gain @ innov
    cov = cov_pred - gain @ S @ gain.T
    return GaussianBeliefState(mean, cov)


def eq28_model(
    dt: float,
    q: Optional[np.ndarray] = None,
    r: Optional[np.ndarray] = None,
) -> FilterModel:
    """Linear approximate process model used in the filter comparison.

    x1' = x1 + 2*x2*dt + x3*dt^2, x2' = x2 + x3*dt, x3' = x3; the
    observation picks (x1, x2). The default noise covariances moment-match
    the generator's laws: N(0, 0.5) read as variance 0.5, U[-1, 1] as
    variance 1/3 and U[-0.1, 0.1] as 1/300.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    F = np.array([[1.0, 2.0 * dt, dt * dt], [0.0, 1.0, dt], [0.0, 0.0, 1.0]])
    H = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    if q is None:
        q = np.diag([0.5, 1.0 / 3.0, 1.0 / 300.0])
    if r is None:
        r = np.diag([0.5, 0.5])
    return FilterModel(
        transition=lambda x: F @ x,
        transition_jacobian=lambda x: F,
        observation=lambda x: H @ x,
        observation_jacobian=lambda x: H,
        process_noise=q,
        measurement_noise=r,
    )
