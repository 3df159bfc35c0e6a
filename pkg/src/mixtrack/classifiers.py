"""Baseline probabilistic classifiers: flat HMM, GNB, LDA, QDA.

Closed-form Gaussian fits with uniform class priors unless configured.
The flat HMM trains one whole-trajectory HMM per class and normalizes
window likelihoods through Bayes' rule like the others.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .gmm import _chol_jittered
from .hmm import GaussianHmm, hmm_fit_baum_welch, hmm_forward_loglik

FLAT_HMM = "flathmm"
GNB = "gnb"
LDA = "lda"
QDA = "qda"

KINDS = (FLAT_HMM, GNB, LDA, QDA)
CLASSIFIER_JITTER = 1e-6
LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class ClassifierModel:
    kind: str
    classes: List
    priors: np.ndarray
    params: Dict = field(default_factory=dict)


def _flatten(x) -> np.ndarray:
    return np.asarray(x, dtype=float).reshape(-1)


def classifier_fit(
    kind: str,
    samples: Sequence,
    labels: Sequence,
    priors: Optional[np.ndarray] = None,
    n_states: int = 3,
    seed: int = 0,
) -> ClassifierModel:
    """Fit one of the baseline classifiers.

    samples are feature windows: (T, D) arrays for the flat HMM, anything
    flattenable to fixed-length vectors for the Gaussian models.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown classifier kind {kind!r}")
    labels = list(labels)
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    for c in classes:
        if labels.count(c) < 2:
            raise ValueError(f"need at least 2 samples for class {c!r}")
    if priors is None:
        priors = np.full(len(classes), 1.0 / len(classes))
    priors = np.asarray(priors, dtype=float)
    priors = priors / priors.sum()

    params: Dict = {}
    if kind == FLAT_HMM:
        for c in classes:
            seqs = [np.atleast_2d(np.asarray(s, float)) for s, l in zip(samples, labels) if l == c]
            params[c] = hmm_fit_baum_welch(seqs, n_states=n_states, seed=seed, restarts=3)
        return ClassifierModel(kind, classes, priors, params)

    X = np.vstack([_flatten(s) for s in samples])
    y = np.array([classes.index(l) for l in labels])
    d = X.shape[1]
    means = np.vstack([X[y == i].mean(axis=0) for i in range(len(classes))])
    params["means"] = means
    if kind == GNB:
        variances = np.vstack(
            [np.maximum(X[y == i].var(axis=0), CLASSIFIER_JITTER) for i in range(len(classes))]
        )
        params["variances"] = variances
    elif kind == LDA:
        pooled = np.zeros((d, d))
        for i in range(len(classes)):
            centered = X[y == i] - means[i]
            pooled += centered.T @ centered
        pooled /= len(X)
        params["covariance"] = pooled + CLASSIFIER_JITTER * np.eye(d)
    else:  # QDA
        covs = []
        for i in range(len(classes)):
            centered = X[y == i] - means[i]
            cov = centered.T @ centered / max(len(centered), 1)
            covs.append(cov + CLASSIFIER_JITTER * np.eye(d))
        params["covariances"] = np.array(covs)
    return ClassifierModel(kind, classes, priors, params)


def classifier_predict(model: ClassifierModel, sample) -> np.ndarray:
    """Posterior class probabilities for one feature window."""
    logs = np.empty(len(model.classes))
    if model.kind == FLAT_HMM:
        window = np.atleast_2d(np.asarray(sample, float))
        for i, c in enumerate(model.classes):
            logs[i] = hmm_forward_loglik(model.params[c], window)
    else:
        x = _flatten(sample)
        means = model.params["means"]
        if model.kind == GNB:
            variances = model.params["variances"]
            diff = x - means
            logs = -0.5 * np.sum(
                diff * diff / variances + np.log(variances) + LOG_2PI, axis=1
            )
        else:
            for i in range(len(model.classes)):
                cov = (
                    model.params["covariance"]
                    if model.kind == LDA
                    else model.params["covariances"][i]
                )
                chol = _chol_jittered(cov)
                alpha = np.linalg.solve(chol, x - means[i])
                logdet = 2.0 * np.sum(np.log(np.diag(chol)))
                logs[i] = -0.5 * (len(x) * LOG_2PI + logdet + alpha @ alpha)
    logs = logs + np.log(model.priors)
    logs -= logs.max()
    probs = np.exp(logs)
    return probs / probs.sum()
