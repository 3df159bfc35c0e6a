"""Full-covariance Gaussian mixture model with EM fitting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.cluster.vq import kmeans2

from .errors import SingularCovariance

EM_JITTER = 1e-6
LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class Gmm:
    weights: np.ndarray  # (N,)
    means: np.ndarray  # (N, D)
    covariances: np.ndarray  # (N, D, D)
    loglik_trace: list = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.covariances = np.asarray(self.covariances, dtype=float)
        if self.covariances.ndim == 2:
            self.covariances = self.covariances[None, :, :]

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def _chol_jittered(cov: np.ndarray) -> np.ndarray:
    d = cov.shape[0]
    for scale in (0.0, EM_JITTER, 1e-3):
        try:
            return np.linalg.cholesky(cov + scale * np.eye(d))
        except np.linalg.LinAlgError:
            continue
    raise SingularCovariance("covariance not positive definite after jitter")


def gaussian_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Multivariate normal log density for an (n, d) batch."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    chol = _chol_jittered(np.atleast_2d(cov))
    solved = np.linalg.solve(chol, (x - mean).T)
    maha = np.sum(solved * solved, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (x.shape[1] * LOG_2PI + logdet + maha)


def gmm_component_logpdfs(gmm: Gmm, x: np.ndarray) -> np.ndarray:
    """log(pi_g) + log N(x | mu_g, Sigma_g) for every component, (n, N)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.empty((x.shape[0], gmm.n_components))
    with np.errstate(divide="ignore"):
        logw = np.log(gmm.weights)
    for g in range(gmm.n_components):
        out[:, g] = logw[g] + gaussian_logpdf(x, gmm.means[g], gmm.covariances[g])
    return out


def gmm_loglik(gmm: Gmm, x: np.ndarray) -> float:
    lp = gmm_component_logpdfs(gmm, x)
    m = lp.max(axis=1, keepdims=True)
    return float(np.sum(m.squeeze(1) + np.log(np.sum(np.exp(lp - m), axis=1))))


def gmm_bic(gmm: Gmm, x: np.ndarray) -> float:
    d = gmm.dim
    n_params = gmm.n_components * (d + d * (d + 1) // 2) + gmm.n_components - 1
    return -2.0 * gmm_loglik(gmm, x) + n_params * np.log(len(np.atleast_2d(x)))


def gmm_sample(gmm: Gmm, n: int, rng: np.random.Generator) -> np.ndarray:
    comps = rng.choice(gmm.n_components, size=n, p=gmm.weights)
    out = np.empty((n, gmm.dim))
    for g in range(gmm.n_components):
        mask = comps == g
        if not mask.any():
            continue
        chol = _chol_jittered(gmm.covariances[g])
        out[mask] = gmm.means[g] + rng.standard_normal((mask.sum(), gmm.dim)) @ chol.T
    return out


def gmm_fit_em(
    data: np.ndarray,
    n_components: int,
    max_iters: int = 300,
    tol: float = 1e-6,
    seed: int = 0,
    restarts: int = 5,
) -> Gmm:
    """EM with k-means initialization; best restart by final log-likelihood.

    A component that collapses onto too few points is reseeded at a random
    datum once, then held at the jitter floor.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = data.shape
    if n < 10 * n_components:
        raise ValueError("need at least 10 samples per mixture component")
    rng = np.random.default_rng(seed)
    eye = np.eye(d)

    best = None
    for r in range(max(restarts, 1)):
        _, labels = kmeans2(data, n_components, minit="++", seed=rng, missing="warn")
        weights = np.bincount(labels, minlength=n_components).astype(float)
        weights = np.maximum(weights, 1.0)
        weights /= weights.sum()
        means = np.empty((n_components, d))
        covs = np.empty((n_components, d, d))
        base_cov = np.cov(data.T).reshape(d, d) + EM_JITTER * eye
        for g in range(n_components):
            pts = data[labels == g]
            means[g] = pts.mean(axis=0) if len(pts) else data[rng.integers(n)]
            covs[g] = np.cov(pts.T).reshape(d, d) + EM_JITTER * eye if len(pts) > d else base_cov
        gmm = Gmm(weights, means, covs)

        trace = []
        reseeded = set()
        for _ in range(max_iters):
            lp = gmm_component_logpdfs(gmm, data)
            m = lp.max(axis=1, keepdims=True)
            lse = m.squeeze(1) + np.log(np.sum(np.exp(lp - m), axis=1))
            trace.append(float(lse.sum()))
            resp = np.exp(lp - lse[:, None])
            nk = resp.sum(axis=0)
            for g in np.flatnonzero(nk < 1e-6):
                # degenerate cluster: reseed once at a random datum
                if g not in reseeded:
                    gmm.means[g] = data[rng.integers(n)]
                    gmm.covariances[g] = base_cov
                    reseeded.add(g)
                nk[g] = max(nk[g], 1e-6)
            gmm.weights = nk / nk.sum()
            gmm.means = (resp.T @ data) / nk[:, None]
            for g in range(gmm.n_components):
                centered = data - gmm.means[g]
                cov = (centered * resp[:, g : g + 1]).T @ centered / nk[g]
                gmm.covariances[g] = 0.5 * (cov + cov.T) + EM_JITTER * eye
            if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= tol * (
                abs(trace[-2]) + 1e-12
            ):
                break
        gmm.loglik_trace = trace
        if best is None or trace[-1] > best.loglik_trace[-1]:
            best = gmm
    return best
