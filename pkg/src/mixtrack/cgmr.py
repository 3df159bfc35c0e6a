"""Conditional Gaussian mixture regression.

A joint mixture over stacked [input | output] vectors, conditioned in
closed form per component. The conditional covariances are input
independent, so they are precomputed once; only the conditional means
and component responsibilities vary with the query.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch
from .gmm import EM_JITTER, Gmm, _chol_jittered, gmm_fit_em

LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class CgmrModel:
    joint: Gmm
    input_dims: tuple
    output_dims: tuple
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.input_dims = tuple(self.input_dims)
        self.output_dims = tuple(self.output_dims)
        all_dims = sorted(self.input_dims + self.output_dims)
        if all_dims != list(range(self.joint.dim)):
            raise ValueError("input/output dims must partition the joint dims")

    @property
    def n_in(self) -> int:
        return len(self.input_dims)

    @property
    def n_out(self) -> int:
        return len(self.output_dims)

    def _terms(self) -> dict:
        """Per-component conditioning terms, computed once."""
        if self._cache:
            return self._cache
        ii = np.ix_(self.input_dims, self.input_dims)
        oo = np.ix_(self.output_dims, self.output_dims)
        oi = np.ix_(self.output_dims, self.input_dims)
        gains, cond_covs, cond_chols, in_chols, mu_in, mu_out = [], [], [], [], [], []
        for g in range(self.joint.n_components):
            cov = self.joint.covariances[g]
            s_ii = cov[ii]
            chol_ii = _chol_jittered(s_ii)
            gain = np.linalg.solve(
                chol_ii.T, np.linalg.solve(chol_ii, cov[oi].T)
            ).T  # Sigma_OI Sigma_II^-1
            cond = cov[oo] - gain @ cov[oi].T
            cond = 0.5 * (cond + cond.T)
            gains.append(gain)
            cond_covs.append(cond)
            cond_chols.append(_chol_jittered(cond))
            in_chols.append(chol_ii)
            mu_in.append(self.joint.means[g][list(self.input_dims)])
            mu_out.append(self.joint.means[g][list(self.output_dims)])
        self._cache = {
            "gain": np.array(gains),
            "cond_cov": np.array(cond_covs),
            "cond_chol": np.array(cond_chols),
            "in_chol": np.array(in_chols),
            "mu_in": np.array(mu_in),
            "mu_out": np.array(mu_out),
        }
        return self._cache


def cgmr_condition_batch(model: CgmrModel, inputs: np.ndarray) -> tuple:
    """Conditional mixtures for an (n, n_in) batch of inputs.

    Returns (weights (n, G), means (n, G, n_out), cond_covs (G, n_out, n_out)).
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.shape[1] != model.n_in:
        raise DimensionMismatch(
            f"input dim {inputs.shape[1]} != model input dim {model.n_in}"
        )
    t = model._terms()
    n, g_count = inputs.shape[0], model.joint.n_components
    log_resp = np.empty((n, g_count))
    means = np.empty((n, g_count, model.n_out))
    with np.errstate(divide="ignore"):
        logw = np.log(model.joint.weights)
    for g in range(g_count):
        diff = inputs - t["mu_in"][g]
        solved = np.linalg.solve(t["in_chol"][g], diff.T)
        maha = np.sum(solved * solved, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(t["in_chol"][g])))
        log_resp[:, g] = logw[g] - 0.5 * (model.n_in * LOG_2PI + logdet + maha)
        means[:, g, :] = t["mu_out"][g] + diff @ t["gain"][g].T
    m = log_resp.max(axis=1, keepdims=True)
    resp = np.exp(log_resp - m)
    resp /= resp.sum(axis=1, keepdims=True)
    return resp, means, t["cond_cov"]


def cgmr_condition(model: CgmrModel, input_values: np.ndarray) -> Gmm:
    """Conditional mixture over the output dims for a single input."""
    resp, means, covs = cgmr_condition_batch(model, np.atleast_2d(input_values))
    return Gmm(resp[0], means[0], covs.copy())


def cgmr_sample_batch(
    model: CgmrModel, inputs: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """One ancestral draw from each conditional mixture, (n, n_out)."""
    resp, means, covs = cgmr_condition_batch(model, inputs)
    n = resp.shape[0]
    cum = np.cumsum(resp, axis=1)
    cum[:, -1] = 1.0
    comps = (rng.random(n)[:, None] > cum).sum(axis=1)
    t = model._terms()
    out = np.empty((n, model.n_out))
    for g in np.unique(comps):
        mask = comps == g
        noise = rng.standard_normal((mask.sum(), model.n_out))
        out[mask] = means[mask, g, :] + noise @ t["cond_chol"][g].T
    return out


def cgmr_sample(
    model: CgmrModel, input_values: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    return cgmr_sample_batch(model, np.atleast_2d(input_values), rng)[0]


def cgmr_fit(
    inputs: np.ndarray,
    outputs: np.ndarray,
    n_components: int,
    max_iters: int = 300,
    tol: float = 1e-6,
    seed: int = 0,
    restarts: int = 5,
) -> CgmrModel:
    """Fit the joint mixture on stacked [input | output] samples."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    outputs = np.atleast_2d(np.asarray(outputs, dtype=float))
    stacked = np.hstack([inputs, outputs])
    joint = gmm_fit_em(
        stacked, n_components, max_iters=max_iters, tol=tol, seed=seed,
        restarts=restarts,
    )
    n_in = inputs.shape[1]
    return CgmrModel(
        joint=joint,
        input_dims=tuple(range(n_in)),
        output_dims=tuple(range(n_in, n_in + outputs.shape[1])),
    )
