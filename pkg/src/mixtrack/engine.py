"""Constrained mixture SMC engine.

Implements the full per-step recursion: proposal sampling with one of two
constraint strategies, likelihood weighting with per-component
normalization and ESS-triggered systematic resampling, component weight
maintenance, k-medoids reclustering with mass-preserving reweighting,
adaptive add/remove/merge of components, occlusion handling, and
divergence alerting.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from .belief import (
    COV_JITTER,
    FeasibleRegion,
    MixtureBelief,
    MixtureComponent,
    ObservationFrame,
    effective_sample_size,
    empirical_moments,
    normalize_weights,
    systematic_resample,
)
from .errors import AllZeroWeights, MissingModel, SingularCovariance
from .kmedoids import kmedoids

ZERO_WEIGHT = "zero-weight"
REJECTION = "rejection"

TRACKING = "tracking"
PREDICTION = "prediction"

FIXED = "fixed"
ADAPTIVE = "adaptive"


class TransitionModel:
    """Behavior-pluggable state transition.

    sample() maps an (n, d) batch of states to the next (n, d) batch.
    density() is optional and only needed for non-prior proposals.
    """

    def sample(
        self, states: np.ndarray, context, rng: np.random.Generator
    ) -> np.ndarray:
        raise NotImplementedError

    def density(self, next_states, states, context):
        raise NotImplementedError


class CallableTransition(TransitionModel):
    """Adapter wrapping a plain function (states, context, rng) -> states."""

    def __init__(self, fn):
        self.fn = fn

    def sample(self, states, context, rng):
        return self.fn(np.atleast_2d(np.asarray(states, dtype=float)), context, rng)


class MeasurementModel:
    """Observation likelihood and predicted-observation map."""

    def likelihood(self, observation: np.ndarray, states: np.ndarray) -> np.ndarray:
        """Per-particle likelihood of one measurement, shape (n,)."""
        raise NotImplementedError

    def predict(self, states: np.ndarray) -> np.ndarray:
        """Predicted observations for an (n, d) state batch, (n, m)."""
        raise NotImplementedError


class GaussianMeasurementModel(MeasurementModel):
    """z = H x + w with w ~ N(0, R); the common case in the benchmark."""

    def __init__(self, H: np.ndarray, R: np.ndarray):
        self.H = np.atleast_2d(np.asarray(H, dtype=float))
        self.R = np.atleast_2d(np.asarray(R, dtype=float))
        self._Rinv = np.linalg.inv(self.R)
        m = self.H.shape[0]
        sign, logdet = np.linalg.slogdet(self.R)
        self._lognorm = -0.5 * (m * np.log(2.0 * np.pi) + logdet)

    def likelihood(self, observation, states):
        innov = observation - self.predict(states)
        maha = np.einsum("ni,ij,nj->n", innov, self._Rinv, innov)
        return np.exp(self._lognorm - 0.5 * maha)

    def predict(self, states):
        return np.atleast_2d(states) @ self.H.T


@dataclass
class EngineConfig:
    strategy: str = ZERO_WEIGHT
    ess_threshold: Optional[float] = None  # None -> 0.5 * component size
    max_rejection_draws: int = 100
    pi_threshold: float = 0.0
    min_assigned_particles: int = 0  # N_mth; 0 disables Add
    merge_threshold: float = 0.0  # d_th; 0 disables Merge
    miss_distance: float = np.inf
    observation_area: Optional[FeasibleRegion] = None
    particles_per_component: int = 100
    function_mode: str = TRACKING
    mixture_update_mode: str = FIXED
    likelihood_combination: str = "sum"
    ess_alert_threshold: float = 1.5
    likelihood_alert_threshold: float = 0.0
    # Spawn settings for Add: state template for unobserved dims, the
    # state indices the measurement fills in, and the draw covariance.
    spawn_state_defaults: Optional[np.ndarray] = None
    spawn_observed_dims: Optional[tuple] = None
    spawn_covariance: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.strategy not in (ZERO_WEIGHT, REJECTION):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.function_mode not in (TRACKING, PREDICTION):
            raise ValueError(f"unknown function mode {self.function_mode!r}")
        if self.mixture_update_mode not in (FIXED, ADAPTIVE):
            raise ValueError(f"unknown mixture mode {self.mixture_update_mode!r}")
        if self.likelihood_combination not in ("sum", "max"):
            raise ValueError("likelihood_combination must be 'sum' or 'max'")
        if self.max_rejection_draws < 1:
            raise ValueError("max_rejection_draws must be >= 1")

    def ess_threshold_for(self, n: int) -> float:
        return 0.5 * n if self.ess_threshold is None else self.ess_threshold


@dataclass
class StepReport:
    step: int
    ess: Dict[int, float] = field(default_factory=dict)
    resampled: Dict[int, bool] = field(default_factory=dict)
    missing: Dict[int, bool] = field(default_factory=dict)
    divergence: Dict[int, bool] = field(default_factory=dict)
    added: List[int] = field(default_factory=list)
    removed: List[int] = field(default_factory=list)
    merged: List[tuple] = field(default_factory=list)
    # weighted state means taken before any resampling, so estimators can
    # avoid paying the resampling noise
    posterior_mean: Dict[int, np.ndarray] = field(default_factory=dict)
    # component weights right after the weight update, before adaptation
    # or reclustering move particles between components
    pi: Dict[int, float] = field(default_factory=dict)

    @property
    def divergence_alert(self) -> bool:
        return any(self.divergence.values())


def prior_update(
    belief: MixtureBelief,
    models: Dict[int, TransitionModel],
    context,
    region: Optional[FeasibleRegion],
    cfg: EngineConfig,
    rng: np.random.Generator,
) -> MixtureBelief:
    """Propagate every particle through its component's transition model.

    Strategy zero-weight draws once and flags infeasible draws; strategy
    rejection redraws infeasible particles up to the configured cap and
    flags only the survivors of an exhausted budget. Weights are not
    touched here.
    """
    out = belief.copy()
    for comp in out.components:
        model = models.get(comp.id)
        if model is None:
            raise MissingModel(f"component {comp.id} has no transition model")
        new_states = np.asarray(model.sample(comp.states, context, rng), dtype=float)
        if region is None:
            feasible = np.ones(comp.n_particles, dtype=bool)
        else:
            feasible = region.contains(new_states)
            if cfg.strategy == REJECTION:
                bad = np.flatnonzero(~feasible)
                draws = 1
                while bad.size and draws < cfg.max_rejection_draws:
                    retry = np.asarray(
                        model.sample(comp.states[bad], context, rng), dtype=float
                    )
                    ok = region.contains(retry)
                    new_states[bad[ok]] = retry[ok]
                    feasible[bad[ok]] = True
                    bad = bad[~ok]
                    draws += 1
        comp.states = new_states
        comp.feasible = feasible
    return out


def combined_likelihood(
    frame: ObservationFrame,
    meas: MeasurementModel,
    states: np.ndarray,
    combination: str,
) -> np.ndarray:
    """Score one particle batch against every measurement in the frame."""
    per_meas = np.stack(
        [meas.likelihood(z, states) for z in frame.measurements], axis=0
    )
    if combination == "sum":
        return per_meas.sum(axis=0)
    return per_meas.max(axis=0)


def measurement_update(
    belief: MixtureBelief,
    frame: ObservationFrame,
    meas: MeasurementModel,
    cfg: EngineConfig,
    rng: np.random.Generator,
    missing: Optional[Dict[int, bool]] = None,
) -> tuple:
    """Likelihood weighting, per-component normalization and resampling.

    Components flagged missing keep their weights (pure prediction).
    A component whose raw weights all vanish keeps its old normalized
    weights and is flagged for the divergence alert instead of being
    silently renormalized.

    Returns (belief, report); the caller still owes update_component_weights.
    """
    if missing is None:
        missing = {c.id: False for c in belief.components}
    out = belief.copy()
    report = StepReport(step=out.step, missing=dict(missing))
    for comp in out.components:
        if missing.get(comp.id, False) or len(frame) == 0:
            report.ess[comp.id] = effective_sample_size(comp.weights)
            report.resampled[comp.id] = False
            report.divergence[comp.id] = False
            comp.raw_weights = comp.weights.copy()
            report.posterior_mean[comp.id] = comp.weights @ comp.states
            continue
        lik = combined_likelihood(frame, meas, comp.states, cfg.likelihood_combination)
        raw = comp.weights * lik
        # Zero-weight: infeasible draws carry no mass. Rejection leaves only
        # exhausted-budget particles infeasible, and those are zeroed too.
        raw = np.where(comp.feasible, raw, 0.0)
        comp.raw_weights = raw
        max_lik = float(lik.max()) if lik.size else 0.0
        try:
            comp.weights = normalize_weights(raw)
        except AllZeroWeights:
            report.ess[comp.id] = effective_sample_size(comp.weights)
            report.resampled[comp.id] = False
            report.divergence[comp.id] = True
            report.posterior_mean[comp.id] = comp.weights @ comp.states
            continue
        report.posterior_mean[comp.id] = comp.weights @ comp.states
        ess = effective_sample_size(comp.weights)
        report.ess[comp.id] = ess
        report.divergence[comp.id] = divergence_alert(ess, max_lik, cfg)
        if ess < cfg.ess_threshold_for(comp.n_particles):
            n_out = cfg.particles_per_component
            idx = systematic_resample(comp.weights, n_out, rng)
            comp.states = comp.states[idx]
            comp.feasible = comp.feasible[idx]
            comp.weights = np.full(n_out, 1.0 / n_out)
            report.resampled[comp.id] = True
        else:
            report.resampled[comp.id] = False
    return out, report


def update_component_weights(
    belief: MixtureBelief,
    missing: Optional[Dict[int, bool]] = None,
) -> MixtureBelief:
    """Maintain component weights from the fresh raw-weight sums.

    pi_m <- pi_m * sum(raw_m) / sum_n pi_n * sum(raw_n), applied over the
    non-missing components only; missing components keep their pi.
    """
    if missing is None:
        missing = {}
    out = belief.copy()
    active = [c for c in out.components if not missing.get(c.id, False)]
    if not active:
        return out
    mass = sum(c.pi for c in active)
    scores = np.array([c.pi * c.raw_weights.sum() for c in active])
    total = scores.sum()
    if total < 1e-300:
        raise AllZeroWeights("component weight update denominator is zero")
    for c, s in zip(active, scores):
        c.pi = mass * s / total
    return out


def recluster(belief: MixtureBelief, rng: np.random.Generator) -> MixtureBelief:
    """k-medoids repartition plus mass-preserving weight redistribution.

    The pooled particle atoms keep their global mass pi_c * w exactly;
    only the grouping and the per-group normalization change. A cluster
    left empty dissolves its component and the remaining pis renormalize.
    """
    out = belief.copy()
    if out.n_components == 1:
        return out
    states = np.vstack([c.states for c in out.components])
    old_pi = np.concatenate(
        [np.full(c.n_particles, c.pi) for c in out.components]
    )
    weights = np.concatenate([c.weights for c in out.components])
    feasible = np.concatenate([c.feasible for c in out.components])
    ids = [c.id for c in out.components]

    init = []
    for c in out.components:
        mean, _ = empirical_moments(c)
        init.append(int(np.argmin(np.linalg.norm(states - mean, axis=1))))
    assignments, _ = kmedoids(states, np.asarray(init), max_iters=50)

    atom_mass = old_pi * weights
    new_components = []
    for c_idx, cid in enumerate(ids):
        members = np.flatnonzero(assignments == c_idx)
        if members.size == 0:
            continue
        pi_new = float(atom_mass[members].sum())
        if pi_new <= 0.0:
            # a cluster of exhausted atoms carries no mass; dissolve it
            continue
        new_components.append(
            MixtureComponent(
                id=cid,
                pi=pi_new,
                states=states[members],
                weights=atom_mass[members] / pi_new,
                raw_weights=atom_mass[members] / pi_new,
                feasible=feasible[members],
            )
        )
    total = sum(c.pi for c in new_components)
    for c in new_components:
        c.pi /= total
    return MixtureBelief(out.step, new_components)


def _gaussian_logdensity(x, mean, cov):
    d = len(mean)
    cov = cov + COV_JITTER * np.eye(d)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as e:
        raise SingularCovariance(str(e)) from e
    alpha = np.linalg.solve(chol, x - mean)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (d * np.log(2.0 * np.pi) + logdet + alpha @ alpha)


def component_distance(comp_m: MixtureComponent, comp_n: MixtureComponent) -> float:
    """Normalized L2 distance between Gaussian fits of two components.

    dist = (|4 pi S_m|^-1/2 + |4 pi S_n|^-1/2 - 2 N(mu_m | mu_n, S_m + S_n))
           / (|4 pi S_m|^-1/2 + |4 pi S_n|^-1/2)

    Symmetric, zero on identical fits, bounded in [0, 1).
    """
    mu_m, cov_m = empirical_moments(comp_m)
    mu_n, cov_n = empirical_moments(comp_n)
    d = len(mu_m)
    eye = np.eye(d)

    def inv_sqrt_det_4pi(cov):
        sign, logdet = np.linalg.slogdet(4.0 * np.pi * (cov + COV_JITTER * eye))
        if sign <= 0:
            raise SingularCovariance("non-positive determinant after jitter")
        return np.exp(-0.5 * logdet)

    a = inv_sqrt_det_4pi(cov_m)
    b = inv_sqrt_det_4pi(cov_n)
    cross = np.exp(_gaussian_logdensity(mu_m, mu_n, cov_m + cov_n))
    dist = (a + b - 2.0 * cross) / (a + b)
    return float(min(max(dist, 0.0), np.nextafter(1.0, 0.0)))


def assert_measurement_missing(
    belief: MixtureBelief,
    frame: Optional[ObservationFrame],
    meas: MeasurementModel,
    cfg: EngineConfig,
) -> Dict[int, bool]:
    """Flag components whose predicted observation matches no measurement."""
    flags = {}
    for comp in belief.components:
        if frame is None or len(frame) == 0:
            flags[comp.id] = True
            continue
        mean, _ = empirical_moments(comp)
        pred = meas.predict(mean[None, :])[0]
        dists = [np.linalg.norm(z - pred) for z in frame.measurements]
        flags[comp.id] = min(dists) > cfg.miss_distance
    return flags


def divergence_alert(ess: float, max_raw_likelihood: float, cfg: EngineConfig) -> bool:
    """True when either degeneracy indicator crosses its alert threshold."""
    return ess < cfg.ess_alert_threshold or max_raw_likelihood < cfg.likelihood_alert_threshold


def _next_component_id(belief: MixtureBelief) -> int:
    return max(c.id for c in belief.components) + 1


def _resample_component_to(
    comp: MixtureComponent, n: int, rng: np.random.Generator
) -> None:
    idx = systematic_resample(comp.weights, n, rng)
    comp.states = comp.states[idx]
    comp.feasible = comp.feasible[idx]
    comp.weights = np.full(n, 1.0 / n)
    comp.raw_weights = comp.weights.copy()


def adapt_components(
    belief: MixtureBelief,
    frame: Optional[ObservationFrame],
    meas: MeasurementModel,
    cfg: EngineConfig,
    rng: np.random.Generator,
    report: Optional[StepReport] = None,
) -> MixtureBelief:
    """Remove, then Add, then Merge; renormalize pi after each phase."""
    out = belief.copy()
    report = report or StepReport(step=out.step)

    # Remove: weight below threshold or mean outside the observation area.
    survivors = []
    for comp in out.components:
        drop = comp.pi < cfg.pi_threshold
        if not drop and cfg.observation_area is not None:
            mean, _ = empirical_moments(comp)
            pred = meas.predict(mean[None, :])[0]
            drop = not bool(cfg.observation_area.contains(pred[None, :])[0])
        if drop:
            report.removed.append(comp.id)
        else:
            survivors.append(comp)
    if not survivors:  # the last component always survives
        keep = max(out.components, key=lambda c: c.pi)
        report.removed.remove(keep.id)
        survivors = [keep]
    total = sum(c.pi for c in survivors)
    for c in survivors:
        c.pi /= total
    out = MixtureBelief(out.step, survivors)

    # Add: a measurement claiming too few particles spawns a component.
    if (
        frame is not None
        and len(frame) > 0
        and cfg.min_assigned_particles > 0
        and cfg.spawn_covariance is not None
    ):
        all_states = np.vstack([c.states for c in out.components])
        pred = meas.predict(all_states)
        meas_mat = np.stack(frame.measurements)
        dists = np.linalg.norm(pred[:, None, :] - meas_mat[None, :, :], axis=2)
        nearest = np.argmin(dists, axis=1)
        counts = np.bincount(nearest, minlength=len(frame))
        for j, z in enumerate(frame.measurements):
            if counts[j] >= cfg.min_assigned_particles:
                continue
            template = (
                np.array(cfg.spawn_state_defaults, dtype=float)
                if cfg.spawn_state_defaults is not None
                else np.zeros(all_states.shape[1])
            )
            obs_dims = cfg.spawn_observed_dims or tuple(range(len(z)))
            template[list(obs_dims)] = z
            chol = np.linalg.cholesky(np.atleast_2d(cfg.spawn_covariance))
            draws = template + rng.standard_normal(
                (cfg.particles_per_component, len(template))
            ) @ chol.T
            cid = _next_component_id(out)
            pi_new = 1.0 / (out.n_components + 1)
            for c in out.components:
                c.pi *= 1.0 - pi_new
            out.components.append(
                MixtureComponent(
                    id=cid,
                    pi=pi_new,
                    states=draws,
                    weights=np.full(len(draws), 1.0 / len(draws)),
                )
            )
            report.added.append(cid)
            out = MixtureBelief(out.step, out.components)

    # Merge: greedy closest pair below the distance threshold.
    if cfg.merge_threshold > 0.0:
        while out.n_components > 1:
            comps = out.components
            best = None
            for i in range(len(comps)):
                for j in range(i + 1, len(comps)):
                    dmn = component_distance(comps[i], comps[j])
                    if dmn < cfg.merge_threshold and (best is None or dmn < best[0]):
                        best = (dmn, i, j)
            if best is None:
                break
            _, i, j = best
            a, b = comps[i], comps[j]
            pi_sum = a.pi + b.pi
            merged = MixtureComponent(
                id=min(a.id, b.id),
                pi=pi_sum,
                states=np.vstack([a.states, b.states]),
                weights=np.concatenate(
                    [a.weights * (a.pi / pi_sum), b.weights * (b.pi / pi_sum)]
                ),
                feasible=np.concatenate([a.feasible, b.feasible]),
            )
            _resample_component_to(merged, cfg.particles_per_component, rng)
            report.merged.append((a.id, b.id))
            remaining = [c for k, c in enumerate(comps) if k not in (i, j)]
            out = MixtureBelief(out.step, remaining + [merged])

    total = sum(c.pi for c in out.components)
    for c in out.components:
        c.pi /= total
    return out


def step(
    belief: MixtureBelief,
    frame: Optional[ObservationFrame],
    models: Dict[int, TransitionModel],
    meas: Optional[MeasurementModel],
    cfg: EngineConfig,
    rng: np.random.Generator,
    context=None,
    region: Optional[FeasibleRegion] = None,
) -> tuple:
    """One full engine iteration; returns (belief, report).

    Tracking mode runs the missing assertion, measurement update and
    component weight maintenance; prediction mode skips all of it. The
    adaptive add/remove/merge pass runs only when a frame is available,
    and reclustering closes every step.
    """
    out = prior_update(belief, models, context, region, cfg, rng)
    report = StepReport(step=out.step)

    if cfg.function_mode == TRACKING and frame is not None and meas is not None:
        missing = assert_measurement_missing(out, frame, meas, cfg)
        out, report = measurement_update(out, frame, meas, cfg, rng, missing)
        if not all(missing.values()) and not all(report.divergence.values()):
            skip = {
                cid: missing.get(cid, False) or report.divergence.get(cid, False)
                for cid in missing
            }
            out = update_component_weights(out, skip)
        report.pi = {c.id: c.pi for c in out.components}
        if cfg.mixture_update_mode == ADAPTIVE:
            out = adapt_components(out, frame, meas, cfg, rng, report)
            # default any spawned components into the report bookkeeping
            for c in out.components:
                report.missing.setdefault(c.id, False)

    out = recluster(out, rng)
    out.step = belief.step + 1
    report.step = out.step
    return out, report


def predict_rollout(
    belief: MixtureBelief,
    models: Dict[int, TransitionModel],
    horizon: int,
    cfg: EngineConfig,
    rng: np.random.Generator,
    context=None,
    region: Optional[FeasibleRegion] = None,
) -> List[MixtureBelief]:
    """Pure prediction-mode rollout; input belief is left untouched."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    pred_cfg = replace(cfg, function_mode=PREDICTION)
    current = belief.copy()
    out = []
    for _ in range(horizon):
        current, _ = step(current, None, models, None, pred_cfg, rng, context, region)
        out.append(current.copy())
    return out
