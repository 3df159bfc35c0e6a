"""Layered HMM recognizer.

Each layer slides a window over its input sequence and emits, per frame,
the vector of per-class window log-likelihoods (normalized by window
length) which the next layer consumes as observations. A softmax with
per-sequence additive calibration turns the last layer's features into
class probabilities that start uniform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import WindowTooLong
from .hmm import GaussianHmm, hmm_prefix_logliks, hmm_windowed_logliks

FEATURE_LOGLIK = "loglik"
FEATURE_ARGMAX = "argmax"
FEATURE_POSTERIOR = "posterior"


def intermediate_features(
    feats: np.ndarray, mode: str, n_classes: int, scale: float = 1.0
) -> np.ndarray:
    """Transform one layer's output before the next layer consumes it.

    Raw window log-likelihoods are unbounded below: a badly mismatched
    class can emit values thousands of nats down, and diagonal-Gaussian
    fits on such heavy-tailed features are dominated by the outliers.
    The posterior mode replaces each frame by its softmax across classes,
    a bounded, discriminative encoding; the argmax mode is its hard
    (one-hot) variant.

    scale multiplies the per-frame normalized log-likelihoods before the
    posterior softmax. It plays the role of the effective number of
    independent frames per window: smoothed inputs make neighboring
    frames strongly correlated, so weighing the full window total would
    overcount evidence and saturate the posterior on look-alike classes.
    """
    if mode == FEATURE_LOGLIK:
        return feats
    if mode == FEATURE_ARGMAX:
        return np.eye(n_classes)[np.argmax(feats, axis=1)]
    if mode == FEATURE_POSTERIOR:
        scaled = feats * scale
        shifted = scaled - scaled.max(axis=1, keepdims=True)
        p = np.exp(shifted)
        return p / p.sum(axis=1, keepdims=True)
    raise ValueError(f"unknown feature mode {mode!r}")


@dataclass
class DhmmLayer:
    models: List[GaussianHmm]
    window: int

    def __post_init__(self):
        if not self.models:
            raise ValueError("layer needs at least one model")
        if self.window < 2:
            raise ValueError("window must be >= 2")

    @property
    def n_classes(self) -> int:
        return len(self.models)


TOP_WINDOWED = "windowed"
TOP_CUMULATIVE = "cumulative"


@dataclass
class DhmmStack:
    layers: List[DhmmLayer]
    class_labels: List[str]
    feature_mode: str = FEATURE_LOGLIK
    # "windowed" scores the last layer like every other layer; "cumulative"
    # scores the whole feature prefix so the class evidence accumulates and
    # the stage ordering within a behavior is visible to the classifier
    top_mode: str = TOP_WINDOWED
    # evidence scale for posterior intermediate features (see
    # intermediate_features)
    feature_scale: float = 1.0
    # with clock_dt > 0, a wall-clock column is appended to every
    # intermediate feature frame. Left-to-right layer models then learn
    # when their states occur, which penalizes sequences that match a
    # class's shape but not its schedule.
    clock_dt: float = 0.0

    def __post_init__(self):
        if not self.layers:
            raise ValueError("stack needs at least one layer")
        if len(self.class_labels) != self.layers[-1].n_classes:
            raise ValueError("one label per last-layer class required")

    @property
    def latency(self) -> int:
        """Total frames consumed before the first probability is emitted."""
        return sum(layer.window for layer in self.layers)


def dhmm_meta_features(layer: DhmmLayer, obs_seq: np.ndarray) -> np.ndarray:
    """Sliding-window per-class features for one layer, (len - T, h)."""
    obs_seq = np.atleast_2d(np.asarray(obs_seq, dtype=float))
    if obs_seq.shape[0] <= layer.window:
        raise WindowTooLong(
            f"sequence length {obs_seq.shape[0]} <= window {layer.window}"
        )
    # windows start mid-sequence, so score them from a uniform initial
    # state distribution rather than the learned start-of-sequence one
    cols = [
        hmm_windowed_logliks(m, obs_seq, layer.window, uniform_initial=True)
        / layer.window
        for m in layer.models
    ]
    return np.stack(cols, axis=1)


def dhmm_propagate(
    stack: DhmmStack, raw_obs_seq: np.ndarray, feature_mode: Optional[str] = None
) -> np.ndarray:
    """Push a raw sequence through every layer; returns last-layer features."""
    mode = feature_mode or stack.feature_mode
    seq = np.atleast_2d(np.asarray(raw_obs_seq, dtype=float))
    offset = 0
    for i, layer in enumerate(stack.layers):
        last = i == len(stack.layers) - 1
        if last and stack.top_mode == TOP_CUMULATIVE:
            if seq.shape[0] <= layer.window:
                raise WindowTooLong(
                    f"sequence length {seq.shape[0]} <= window {layer.window}"
                )
            cols = [hmm_prefix_logliks(m, seq) for m in layer.models]
            # normalized by window length like every other layer's features
            feats = np.stack(cols, axis=1)[layer.window :] / layer.window
        else:
            feats = dhmm_meta_features(layer, seq)
        offset += layer.window
        if not last:
            feats = intermediate_features(
                feats, mode, layer.n_classes, stack.feature_scale
            )
            if stack.clock_dt > 0.0:
                clock = (np.arange(len(feats)) + offset) * stack.clock_dt
                feats = np.column_stack([feats, clock])
        seq = feats
    return seq


def dhmm_recognize(stack: DhmmStack, raw_obs_seq: np.ndarray) -> np.ndarray:
    """Per-frame class probabilities, (len - latency, n_classes).

    Calibration offsets are fixed from the first emitted frame so that
    the initial probabilities are exactly uniform, and held constant for
    the rest of the sequence.
    """
    feats = dhmm_propagate(stack, raw_obs_seq)
    alpha = -feats[0]
    logits = feats + alpha
    logits -= logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs
