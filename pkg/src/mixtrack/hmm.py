"""Gaussian-emission hidden Markov models.

Diagonal-Gaussian emissions keep the Baum-Welch M-step closed form and
the data requirements low. The forward pass is available in a single
log-space variant (exact log-likelihood) and a batched sliding-window
variant used by the layered recognizer.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import DegenerateData, DimensionMismatch

VAR_FLOOR = 1e-8
LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class GaussianHmm:
    initial: np.ndarray  # (S,)
    transition: np.ndarray  # (S, S), row stochastic
    means: np.ndarray  # (S, D)
    variances: np.ndarray  # (S, D), diagonal
    loglik_trace: list = field(default_factory=list)

    def __post_init__(self):
        self.initial = np.asarray(self.initial, dtype=float)
        self.transition = np.atleast_2d(np.asarray(self.transition, dtype=float))
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.variances = np.maximum(
            np.atleast_2d(np.asarray(self.variances, dtype=float)), VAR_FLOOR
        )

    @property
    def n_states(self) -> int:
        return len(self.initial)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def validate(self) -> None:
        if abs(self.initial.sum() - 1.0) > 1e-9:
            raise ValueError("initial distribution does not sum to 1")
        if np.any(np.abs(self.transition.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("transition matrix rows do not sum to 1")

    def log_emissions(self, seq: np.ndarray) -> np.ndarray:
        """Per-frame per-state emission log density, shape (T, S)."""
        seq = np.atleast_2d(np.asarray(seq, dtype=float))
        if seq.shape[1] != self.dim:
            raise DimensionMismatch(
                f"observation dim {seq.shape[1]} != emission dim {self.dim}"
            )
        diff = seq[:, None, :] - self.means[None, :, :]
        return -0.5 * np.sum(
            diff * diff / self.variances + np.log(self.variances) + LOG_2PI,
            axis=2,
        )


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = safe.squeeze(axis) + np.log(np.sum(np.exp(a - safe), axis=axis))
    return out


def hmm_forward_loglik(hmm: GaussianHmm, window: np.ndarray) -> float:
    """Exact log-likelihood of a window via the log-space forward recursion."""
    loge = hmm.log_emissions(window)
    with np.errstate(divide="ignore"):
        log_a = np.log(hmm.transition)
        la = np.log(hmm.initial) + loge[0]
    for t in range(1, loge.shape[0]):
        la = _logsumexp(la[:, None] + log_a, axis=0) + loge[t]
    return float(_logsumexp(la, axis=0))


def hmm_windowed_logliks(
    hmm: GaussianHmm,
    seq: np.ndarray,
    window: int,
    uniform_initial: bool = False,
) -> np.ndarray:
    """Log-likelihood of every length-`window` slice seq[i:i+window].

    Batched over all len-window start positions; equivalent to calling
    hmm_forward_loglik per slice. With uniform_initial the learned
    initial distribution is replaced by 1/S per state, appropriate when
    the slices start mid-sequence rather than at sequence starts.
    """
    loge = hmm.log_emissions(seq)
    n_windows = loge.shape[0] - window
    if n_windows < 1:
        raise DimensionMismatch("sequence not longer than window")
    starts = np.arange(n_windows)
    initial = (
        np.full(hmm.n_states, 1.0 / hmm.n_states) if uniform_initial else hmm.initial
    )
    with np.errstate(divide="ignore"):
        log_a = np.log(hmm.transition)
        la = np.log(initial)[None, :] + loge[starts]
    for t in range(1, window):
        la = _logsumexp(la[:, :, None] + log_a[None, :, :], axis=1) + loge[starts + t]
    return _logsumexp(la, axis=1)


def hmm_prefix_logliks(hmm: GaussianHmm, seq: np.ndarray) -> np.ndarray:
    """Cumulative forward log-likelihood of every prefix seq[:t+1], (T,).

    One scaled forward pass; entry t equals hmm_forward_loglik(seq[:t+1]).
    """
    loge = hmm.log_emissions(seq)
    T, S = loge.shape
    shift = loge.max(axis=1)
    b = np.exp(loge - shift[:, None])
    A = hmm.transition
    log_scale = np.empty(T)
    a = hmm.initial * b[0]
    s = a.sum()
    log_scale[0] = np.log(max(s, 1e-300))
    a /= max(s, 1e-300)
    for t in range(1, T):
        a = (a @ A) * b[t]
        s = a.sum()
        log_scale[t] = np.log(max(s, 1e-300))
        a /= max(s, 1e-300)
    return np.cumsum(log_scale + shift)


def _forward_backward(hmm: GaussianHmm, seq: np.ndarray):
    """Scaled forward-backward; returns (loglik, gamma, xi_sum)."""
    loge = hmm.log_emissions(seq)
    T, S = loge.shape
    shift = loge.max(axis=1, keepdims=True)
    b = np.exp(loge - shift)  # (T, S), each row max 1
    A = hmm.transition

    alpha = np.empty((T, S))
    scale = np.empty(T)
    alpha[0] = hmm.initial * b[0]
    scale[0] = alpha[0].sum()
    alpha[0] /= scale[0]
    for t in range(1, T):
        a = (alpha[t - 1] @ A) * b[t]
        scale[t] = a.sum()
        alpha[t] = a / scale[t]

    beta = np.empty((T, S))
    beta[-1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = (A @ (b[t + 1] * beta[t + 1])) / scale[t + 1]

    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    xi_sum = np.zeros((S, S))
    for t in range(T - 1):
        xi = (alpha[t][:, None] * A) * (b[t + 1] * beta[t + 1])[None, :]
        xi_sum += xi / max(xi.sum(), 1e-300)
    loglik = float(np.sum(np.log(scale)) + shift.sum())
    return loglik, gamma, xi_sum


def _random_init(
    frames: np.ndarray, n_states: int, rng: np.random.Generator
) -> GaussianHmm:
    idx = rng.choice(len(frames), size=n_states, replace=len(frames) < n_states)
    spread = frames.std(axis=0) + 1e-3
    means = frames[idx] + 0.1 * spread * rng.standard_normal((n_states, frames.shape[1]))
    variances = np.tile(np.maximum(frames.var(axis=0), VAR_FLOOR), (n_states, 1))
    transition = rng.random((n_states, n_states)) + n_states * np.eye(n_states)
    transition /= transition.sum(axis=1, keepdims=True)
    initial = rng.random(n_states) + 1.0
    initial /= initial.sum()
    return GaussianHmm(initial, transition, means, variances)


def hmm_fit_baum_welch(
    sequences: Sequence[np.ndarray],
    n_states: int,
    max_iters: int = 200,
    tol: float = 1e-6,
    seed: int = 0,
    restarts: int = 5,
    var_floor: float = VAR_FLOOR,
    init_model: Optional[GaussianHmm] = None,
) -> GaussianHmm:
    """EM fit; returns the best of `restarts` random initializations.

    The stored loglik_trace is nondecreasing (to EM slack) and the
    selection criterion across restarts is the final training loglik.
    With init_model the optimization starts from that single model
    instead of random restarts.
    """
    sequences = [np.atleast_2d(np.asarray(s, dtype=float)) for s in sequences]
    frames = np.vstack(sequences)
    if len(frames) < 10 * n_states:
        raise ValueError("need at least 10 frames per hidden state")
    if np.allclose(frames, frames[0]):
        warnings.warn(
            "all training frames identical; variance floor applied",
            category=UserWarning,
        )

    rng = np.random.default_rng(seed)
    best = None
    n_runs = 1 if init_model is not None else max(restarts, 1)
    for _ in range(n_runs):
        hmm = init_model if init_model is not None else _random_init(
            frames, n_states, rng
        )
        trace = []
        for _ in range(max_iters):
            total_ll = 0.0
            init_acc = np.zeros(n_states)
            xi_acc = np.zeros((n_states, n_states))
            gamma_sum = np.zeros(n_states)
            mean_acc = np.zeros((n_states, frames.shape[1]))
            sq_acc = np.zeros((n_states, frames.shape[1]))
            for seq in sequences:
                ll, gamma, xi = _forward_backward(hmm, seq)
                total_ll += ll
                init_acc += gamma[0]
                xi_acc += xi
                gamma_sum += gamma.sum(axis=0)
                mean_acc += gamma.T @ seq
                sq_acc += gamma.T @ (seq * seq)
            trace.append(total_ll)
            if len(trace) > 1 and (
                abs(trace[-1] - trace[-2]) <= tol * (abs(trace[-2]) + 1e-12)
            ):
                break
            initial = init_acc / init_acc.sum()
            row_sums = xi_acc.sum(axis=1, keepdims=True)
            transition = np.where(row_sums > 0, xi_acc / np.maximum(row_sums, 1e-300),
                                  1.0 / n_states)
            # states with no occupancy keep their previous parameters
            # instead of dividing by a vanishing responsibility mass
            alive = gamma_sum > 1e-12
            occ = np.where(alive, gamma_sum, 1.0)[:, None]
            means = np.where(alive[:, None], mean_acc / occ, hmm.means)
            variances = np.where(
                alive[:, None],
                np.maximum(sq_acc / occ - (mean_acc / occ) ** 2, var_floor),
                hmm.variances,
            )
            hmm = GaussianHmm(initial, transition, means, variances)
        hmm.loglik_trace = trace
        if best is None or trace[-1] > best.loglik_trace[-1]:
            best = hmm
    return best


def select_hidden_states_bic(
    sequences: Sequence[np.ndarray],
    candidates: Sequence[int],
    seed: int = 0,
) -> int:
    """Hidden state count minimizing the BIC of a pre-fit Gaussian mixture."""
    from .gmm import gmm_bic, gmm_fit_em

    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidate range is empty")
    if len(candidates) == 1:
        return candidates[0]
    frames = np.vstack([np.atleast_2d(np.asarray(s, dtype=float)) for s in sequences])
    best_n, best_bic = None, np.inf
    for n in candidates:
        gmm = gmm_fit_em(frames, n, seed=seed, restarts=2)
        bic = gmm_bic(gmm, frames)
        if bic < best_bic:
            best_n, best_bic = n, bic
    return best_n
