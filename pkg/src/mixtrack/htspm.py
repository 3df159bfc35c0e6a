"""Hierarchical recognition-plus-evolution prediction model.

Fuses behavior probabilities from the recognizer with behavior-specific
conditional mixture regressors. The filter state is a stacked window of
the last few frames; each propagation samples a behavior per particle,
draws a per-step state increment from that behavior's regressor
conditioned on the window, and shifts the window forward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .cgmr import CgmrModel, cgmr_sample_batch
from .dhmm import DhmmStack
from .engine import TransitionModel


@dataclass
class HtspmModel:
    recognizer: Optional[DhmmStack]
    evolution: Dict[str, CgmrModel]
    behavior_labels: List[str]
    window: int = 3
    frame_dim: int = 3
    # roughening: per-dim std of exploration noise added to the sampled
    # frame. The regressor's conditional draws are sharp, so without it
    # the cloud can lose diversity on the unmeasured dim and die at an
    # abrupt regime switch.
    jitter: Optional[np.ndarray] = None

    def __post_init__(self):
        for label in self.behavior_labels:
            if label not in self.evolution:
                raise ValueError(f"behavior {label!r} has no evolution model")


def stack_window(frames: np.ndarray) -> np.ndarray:
    """Flatten the last `len(frames)` frames into one window state."""
    return np.asarray(frames, dtype=float).reshape(-1)


def newest_frame(states: np.ndarray, frame_dim: int) -> np.ndarray:
    """Last frame of each stacked window state, (n, frame_dim)."""
    return np.atleast_2d(states)[:, -frame_dim:]


def window_features(states: np.ndarray, frame_dim: int) -> np.ndarray:
    """Regression input for a stacked window: x1 relative to the newest frame.

    The first state dimension grows without bound over a trajectory, so
    conditioning on its absolute value puts every tracking query far from
    the training clusters. Shifting each frame's x1 by the newest frame's
    x1 makes the input translation-invariant; the other dimensions are
    already range-bounded.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    feats = states.copy()
    feats[:, ::frame_dim] -= states[:, [-frame_dim]]
    return feats


def htspm_propagate(
    states: np.ndarray,
    probabilities: np.ndarray,
    model: HtspmModel,
    rng: np.random.Generator,
) -> np.ndarray:
    """One evolution step for an (n, window*frame_dim) particle batch.

    Per particle: sample a behavior from the probability vector, draw a
    frame increment from that behavior's conditional regressor given the
    window, append current_frame + increment and drop the oldest frame.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    probabilities = np.asarray(probabilities, dtype=float)
    n = states.shape[0]
    d = model.frame_dim
    behaviors = rng.choice(len(model.behavior_labels), size=n, p=probabilities)
    feats = window_features(states, d)
    increments = np.empty((n, d))
    for b in np.unique(behaviors):
        mask = behaviors == b
        reg = model.evolution[model.behavior_labels[b]]
        increments[mask] = cgmr_sample_batch(reg, feats[mask], rng)
    new_frames = states[:, -d:] + increments
    if model.jitter is not None:
        new_frames = new_frames + rng.normal(size=(n, d)) * model.jitter
    return np.hstack([states[:, d:], new_frames])


class HtspmTransition(TransitionModel):
    """Engine adapter; the context carries the behavior probabilities.

    A missing context falls back to uniform behavior probabilities,
    which also covers the steps before the recognizer's first output.
    """

    def __init__(self, model: HtspmModel):
        self.model = model

    def sample(self, states, context, rng):
        if context is None:
            probs = np.full(
                len(self.model.behavior_labels),
                1.0 / len(self.model.behavior_labels),
            )
        else:
            probs = np.asarray(context, dtype=float)
        return htspm_propagate(states, probs, self.model, rng)


class PooledCgmrTransition(TransitionModel):
    """Behavior-unconditional variant: one pooled regressor for all data."""

    def __init__(self, regressor: CgmrModel, frame_dim: int, jitter=None):
        self.regressor = regressor
        self.frame_dim = frame_dim
        self.jitter = jitter

    def sample(self, states, context, rng):
        states = np.atleast_2d(np.asarray(states, dtype=float))
        d = self.frame_dim
        feats = window_features(states, d)
        increments = cgmr_sample_batch(self.regressor, feats, rng)
        new_frames = states[:, -d:] + increments
        if self.jitter is not None:
            new_frames = new_frames + rng.normal(size=(len(states), d)) * self.jitter
        return np.hstack([states[:, d:], new_frames])
