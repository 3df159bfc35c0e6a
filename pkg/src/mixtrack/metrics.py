"""Tracking and prediction error metrics."""

from __future__ import annotations

import numpy as np

from .errors import LengthMismatch


def compute_mae(estimates: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Mean absolute error per state dimension over the horizon."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    tru = np.atleast_2d(np.asarray(truth, dtype=float))
    if est.shape != tru.shape:
        raise LengthMismatch(f"shapes differ: {est.shape} vs {tru.shape}")
    if est.shape[0] < 1:
        raise LengthMismatch("empty sequences")
    return np.mean(np.abs(est - tru), axis=0)


def compute_ade(predicted: np.ndarray, truth: np.ndarray) -> float:
    """Average Euclidean distance between predicted and true 2-D points."""
    pred = np.atleast_2d(np.asarray(predicted, dtype=float))
    tru = np.atleast_2d(np.asarray(truth, dtype=float))
    if pred.shape != tru.shape:
        raise LengthMismatch(f"shapes differ: {pred.shape} vs {tru.shape}")
    if pred.shape[0] < 1:
        raise LengthMismatch("empty sequences")
    return float(np.mean(np.linalg.norm(pred - tru, axis=1)))
