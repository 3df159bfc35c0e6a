"""Benchmark orchestration: model training, tracking runs, scenarios.

Everything here is deterministic given (config, master seed); per-task
rngs are derived from the master seed with fixed derivation keys so the
execution order of independent tasks does not matter.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import engine
from .belief import FeasibleRegion, MixtureBelief, ObservationFrame, uniform_component
from .cgmr import CgmrModel, cgmr_fit
from .classifiers import classifier_fit
from . import dhmm
from .dhmm import DhmmLayer, DhmmStack, dhmm_meta_features, dhmm_recognize
from .engine import (
    CallableTransition,
    EngineConfig,
    GaussianMeasurementModel,
    StepReport,
)
from .filters import GaussianBeliefState, ekf_step, eq28_model, ukf_step
from .hmm import GaussianHmm, hmm_fit_baum_welch, select_hidden_states_bic
from .htspm import HtspmModel, HtspmTransition, PooledCgmrTransition, window_features
from .metrics import compute_ade, compute_mae
from .scenario import (
    BehaviorSpec,
    LabeledTrajectory,
    default_behavior_spec,
    make_dataset,
    sample_process_noise,
)

DEFAULT_CONFIG = {
    "master_seed": 0,
    "dt": 0.1,
    "sub_stage_duration": 40,
    "train_per_behavior": 50,
    "validation_per_behavior": 10,
    "test_per_behavior": 20,
    "particles_per_component": 100,
    "strategy": "rejection",
    "hmm_states": 3,
    "select_states_bic": False,
    "windows": [15, 15, 15],
    "hmm_restarts": 3,
    "cgmr_components": 10,
    "ggmr_components": 20,
    "cgmr_restarts": 2,
    "evolution_window": 3,
    "evolution_jitter": [0.0, 0.0, 1.0],
    "mixture_components": 5,
}


def config_hash(config: dict) -> str:
    return hashlib.sha256(
        json.dumps(config, sort_keys=True).encode()
    ).hexdigest()[:16]


def merged_config(overrides: Optional[dict] = None) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    if overrides:
        unknown = set(overrides) - set(cfg) - {"out_dir"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(overrides)
    return cfg


# ---------------------------------------------------------------------------
# Recognizer training


def _contiguous_runs(labels: Sequence) -> List[Tuple[object, int, int]]:
    """(label, start, end) for maximal constant runs, end exclusive."""
    out = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            out.append((labels[start], start, i))
            start = i
    return out


def _moment_init(
    state_frames: List[np.ndarray],
    dwell: float,
    var_floor: float,
    start_at_first: bool = False,
    tied_variance: Optional[float] = None,
) -> GaussianHmm:
    """Left-to-right HMM with per-state moments from labeled frame groups.

    With tied_variance every state gets the same isotropic spread, so no
    class can win by learning broad catch-all states; the likelihood
    differences reduce to distances from the state means.
    """
    return _multi_chain_init(
        [state_frames], dwell, var_floor,
        start_at_first=start_at_first, tied_variance=tied_variance,
    )


def _multi_chain_init(
    chains: List[List[np.ndarray]],
    dwell: float,
    var_floor: float,
    start_at_first: bool = False,
    tied_variance: Optional[float] = None,
    clock_dim: bool = False,
) -> GaussianHmm:
    """HMM from several parallel left-to-right chains of moment states.

    One chain per occurrence context of the class (e.g. each schedule
    slot a sub-stage appears in), so multi-modal classes are covered by
    separate state sequences instead of one smeared average. The last
    state of each chain absorbs. With clock_dim the final feature column
    is a wall clock whose variance stays empirical even when the rest is
    tied.
    """
    means, variances, blocks = [], [], []
    for state_frames in chains:
        for frames in state_frames:
            means.append(frames.mean(axis=0))
            v = np.maximum(frames.var(axis=0), var_floor)
            if tied_variance is not None:
                if clock_dim:
                    v[:-1] = tied_variance
                else:
                    v[:] = tied_variance
            variances.append(v)
        blocks.append(len(state_frames))
    k = len(means)
    transition = np.zeros((k, k))
    initial = np.zeros(k)
    p_stay = 1.0 - 1.0 / dwell
    i = 0
    for n in blocks:
        initial[i] = 1.0
        for j in range(n - 1):
            transition[i + j, i + j] = p_stay
            transition[i + j, i + j + 1] = 1.0 - p_stay
        transition[i + n - 1, i + n - 1] = 1.0
        i += n
    if start_at_first:
        initial = np.zeros(k)
        initial[0] = 1.0
    initial += 1e-6
    initial /= initial.sum()
    transition += 1e-8
    transition /= transition.sum(axis=1, keepdims=True)
    return GaussianHmm(initial, transition, np.array(means), np.array(variances))


def _fit_layer(
    segments_by_class: Dict[object, List[np.ndarray]],
    class_order: Sequence,
    window: int,
    n_states: int,
    select_bic: bool,
    restarts: int,
    seed: int,
    var_floor: float = 1e-8,
    init_models: Optional[Dict[object, GaussianHmm]] = None,
    em_iters: int = 200,
) -> DhmmLayer:
    models = []
    for idx, cls in enumerate(class_order):
        seqs = segments_by_class[cls]
        init = None if init_models is None else init_models[cls]
        if init is not None and em_iters == 0:
            models.append(init)
            continue
        states = init.n_states if init is not None else n_states
        if select_bic and init is None:
            states = select_hidden_states_bic(seqs, range(1, n_states + 1), seed=seed)
        models.append(
            hmm_fit_baum_welch(
                seqs, states, restarts=restarts, seed=seed * 1000 + idx,
                var_floor=var_floor, init_model=init, max_iters=max(em_iters, 1),
            )
        )
    return DhmmLayer(models=models, window=window)


def recognizer_inputs(observations: np.ndarray, dt: float) -> np.ndarray:
    """Causal recognition features from raw (z1, z2) measurements.

    Columns: a smoothed acceleration estimate (5-step difference of the
    velocity channel), its 8-step trend (a maneuver-input estimate), and
    a wall clock. Acceleration carries nearly all of the sub-stage
    signal; the raw velocity level depends on the trajectory's random
    start so it is dropped. The clock lets HMM states learn when in the
    schedule they occur, which is what separates sub-stages whose local
    motion profiles alias each other at different schedule slots.
    """
    observations = np.atleast_2d(np.asarray(observations, dtype=float))
    z2 = observations[:, 1]
    n = len(z2)
    accel = np.zeros(n)
    accel[5:] = (z2[5:] - z2[:-5]) / (5.0 * dt)
    trend = np.zeros(n)
    trend[8:] = (accel[8:] - accel[:-8]) / 8.0
    clock = np.arange(n) * dt
    return np.column_stack([accel, trend, clock])


def train_recognizer(
    train_data: Dict[str, List[LabeledTrajectory]],
    spec: BehaviorSpec,
    windows: Sequence[int] = (15, 15, 15),
    n_states: int = 3,
    restarts: int = 3,
    select_bic: bool = False,
    seed: int = 0,
    feature_mode: str = dhmm.FEATURE_POSTERIOR,
    em_iters: int = 10,
    feature_scale: float = 2.0,
    tied_variance: float = 0.05,
) -> DhmmStack:
    """Fit the three-layer recognizer from labeled trajectories.

    Expects trajectories whose observations are recognizer_inputs-style
    features with a trailing clock column. Layer inputs are segmented by
    the generator's own sub-stage / stage / behavior labels; a feature
    frame inherits the raw label at its window end so segmentation stays
    causal.

    Sub-stage and stage models get one left-to-right chain per schedule
    slot the class occurs in. Behavior models get one state per (stage,
    slot), and those states are pooled over every behavior passing
    through that slot, so two behaviors sharing a stage prefix score a
    shared prefix identically and their posteriors split only once the
    trajectories actually diverge.
    """
    t1, t2, t3 = windows
    sub_ids = sorted(spec.sub_stage_g)
    stage_ids = sorted(spec.stages)
    behavior_ids = sorted(spec.behaviors)
    trajs = [t for trajs in train_data.values() for t in trajs]
    floor = 1e-3
    dt = spec.dt

    # Sub-stage models: chains of temporal-chunk states, one chain per
    # occurrence slot (keyed by segment start), then a short EM polish.
    sub_chains = {s: {} for s in sub_ids}
    sub_segments = {s: [] for s in sub_ids}
    for traj in trajs:
        for sub, a, b in _contiguous_runs([l[2] for l in traj.labels]):
            sub_chains[sub].setdefault(a, []).append(traj.observations[a:b])
            sub_segments[sub].append(traj.observations[a:b])
    models1 = []
    for idx, s in enumerate(sub_ids):
        chains = []
        for start, segs in sorted(sub_chains[s].items()):
            chunks = [[] for _ in range(n_states)]
            for seg in segs:
                bounds = np.linspace(0, len(seg), n_states + 1).astype(int)
                for k in range(n_states):
                    chunks[k].append(seg[bounds[k] : bounds[k + 1]])
            chains.append([np.vstack(c) for c in chunks])
        dwell = np.mean([len(g) for g in sub_segments[s]]) / n_states
        init = _multi_chain_init(chains, max(dwell, 2.0), floor)
        if em_iters > 0:
            init = hmm_fit_baum_welch(
                sub_segments[s], init.n_states, max_iters=em_iters,
                seed=seed * 1000 + idx, init_model=init, var_floor=floor,
            )
        models1.append(init)
    layer1 = DhmmLayer(models=models1, window=t1)

    def l1_feats(traj):
        f = dhmm.intermediate_features(
            dhmm_meta_features(layer1, traj.observations),
            feature_mode, layer1.n_classes, feature_scale,
        )
        clock = (np.arange(len(f)) + t1) * dt
        f = np.column_stack([f, clock])
        labels = [traj.labels[i + t1 - 1] for i in range(len(f))]
        return f, labels

    # Stage models: two chunk states per occurrence slot, tied variance
    # on the posterior coordinates so no stage can win with broad
    # catch-all states.
    stage_chains = {s: {} for s in stage_ids}
    layer2_inputs = []
    for traj in trajs:
        f, labels = l1_feats(traj)
        layer2_inputs.append((traj.behavior, f, labels))
        for st, a, b in _contiguous_runs([l[1] for l in labels]):
            stage_chains[st].setdefault(a, []).append(f[a:b])
    models2 = []
    for st in stage_ids:
        chains = []
        for start, segs in sorted(stage_chains[st].items()):
            chunks = [[], []]
            for seg in segs:
                half = len(seg) // 2
                chunks[0].append(seg[:half])
                chunks[1].append(seg[half:])
            chains.append([np.vstack(c) for c in chunks])
        models2.append(
            _multi_chain_init(chains, 40.0, floor,
                              tied_variance=tied_variance, clock_dim=True)
        )
    layer2 = DhmmLayer(models=models2, window=t2)

    # Behavior models: one state per (stage, slot), pooled across every
    # behavior that visits the stage at that slot.
    slot_library = {}
    behavior_slots = {b: None for b in behavior_ids}
    for behavior, f, labels in layer2_inputs:
        f2 = dhmm.intermediate_features(
            dhmm_meta_features(layer2, f),
            feature_mode, layer2.n_classes, feature_scale,
        )
        clock = (np.arange(len(f2)) + t1 + t2) * dt
        f2 = np.column_stack([f2, clock])
        labels2 = [labels[i + t2 - 1] for i in range(len(f2))]
        runs = _contiguous_runs([l[1] for l in labels2])
        for st, a, b in runs:
            slot_library.setdefault((st, a), []).append(f2[a:b])
        if behavior_slots[behavior] is None:
            behavior_slots[behavior] = [(st, a) for st, a, b in runs]
    slot_moments = {k: np.vstack(v) for k, v in slot_library.items()}
    models3 = [
        _multi_chain_init(
            [[slot_moments[key]] for key in behavior_slots[b]],
            80.0, floor, start_at_first=True,
            tied_variance=tied_variance, clock_dim=True,
        )
        for b in behavior_ids
    ]
    layer3 = DhmmLayer(models=models3, window=t3)
    return DhmmStack(
        layers=[layer1, layer2, layer3],
        class_labels=list(behavior_ids),
        feature_mode=feature_mode,
        top_mode=dhmm.TOP_CUMULATIVE,
        feature_scale=feature_scale,
        clock_dt=dt,
    )


def train_flat_classifier(
    train_data: Dict[str, List[LabeledTrajectory]],
    spec: BehaviorSpec,
    config: dict,
    kind: str,
):
    """Baseline behavior classifier on non-overlapping feature windows."""
    window = config["windows"][0]
    samples, labels = [], []
    for behavior in sorted(train_data):
        for traj in train_data[behavior]:
            feats = recognizer_inputs(traj.observations, spec.dt)
            for start in range(0, len(feats) - window + 1, window):
                samples.append(feats[start : start + window])
                labels.append(behavior)
    return classifier_fit(
        kind, samples, labels,
        n_states=config["hmm_states"], seed=config["master_seed"],
    )


def recognition_trace(stack: DhmmStack, observations: np.ndarray) -> np.ndarray:
    """Per-raw-step behavior probabilities, uniform before the first output.

    The probability assigned to raw step t only depends on observations
    up to t, so the trace is safe to use inside a causal tracking loop.
    """
    observations = np.atleast_2d(observations)
    n_classes = stack.layers[-1].n_classes
    out = np.full((len(observations), n_classes), 1.0 / n_classes)
    if len(observations) > stack.latency:
        probs = dhmm_recognize(stack, observations)
        out[stack.latency :] = probs
    return out


# ---------------------------------------------------------------------------
# Evolution training


def evolution_samples(
    trajs: Sequence[LabeledTrajectory], window: int
) -> Tuple[np.ndarray, np.ndarray]:
    """(window-of-states, next increment) pairs from trajectories."""
    xs, ys = [], []
    for traj in trajs:
        s = traj.states
        for t in range(window - 1, len(s) - 1):
            xs.append(s[t - window + 1 : t + 1].reshape(-1))
            ys.append(s[t + 1] - s[t])
    d = trajs[0].states.shape[1]
    return window_features(np.array(xs), d), np.array(ys)


def train_evolution(
    train_data: Dict[str, List[LabeledTrajectory]],
    window: int = 3,
    n_components: int = 10,
    pooled_components: int = 20,
    restarts: int = 2,
    seed: int = 0,
) -> Tuple[Dict[str, CgmrModel], CgmrModel]:
    """Per-behavior regressors plus the pooled behavior-unconditional one."""
    per_behavior = {}
    all_x, all_y = [], []
    for idx, behavior in enumerate(sorted(train_data)):
        x, y = evolution_samples(train_data[behavior], window)
        per_behavior[behavior] = cgmr_fit(
            x, y, n_components, restarts=restarts, seed=seed * 100 + idx
        )
        all_x.append(x)
        all_y.append(y)
    pooled = cgmr_fit(
        np.vstack(all_x), np.vstack(all_y), pooled_components,
        restarts=restarts, seed=seed * 100 + 99,
    )
    return per_behavior, pooled


@dataclass
class BenchModels:
    recognizer: DhmmStack
    evolution: Dict[str, CgmrModel]
    pooled: CgmrModel
    htspm: HtspmModel


def train_benchmark_models(
    train_data: Dict[str, List[LabeledTrajectory]],
    spec: BehaviorSpec,
    config: dict,
) -> BenchModels:
    seed = config["master_seed"]
    rec_data = {
        b: [
            LabeledTrajectory(
                states=t.states,
                observations=recognizer_inputs(t.observations, spec.dt),
                labels=t.labels,
                behavior=t.behavior,
            )
            for t in trajs
        ]
        for b, trajs in train_data.items()
    }
    recognizer = train_recognizer(
        rec_data,
        spec,
        windows=config["windows"],
        n_states=config["hmm_states"],
        restarts=config["hmm_restarts"],
        select_bic=config["select_states_bic"],
        seed=seed,
    )
    evolution, pooled = train_evolution(
        train_data,
        window=config["evolution_window"],
        n_components=config["cgmr_components"],
        pooled_components=config["ggmr_components"],
        restarts=config["cgmr_restarts"],
        seed=seed + 7,
    )
    htspm = HtspmModel(
        recognizer=recognizer,
        evolution=evolution,
        behavior_labels=sorted(train_data),
        window=config["evolution_window"],
        frame_dim=3,
        jitter=np.asarray(config["evolution_jitter"], dtype=float),
    )
    return BenchModels(recognizer, evolution, pooled, htspm)


# ---------------------------------------------------------------------------
# Tracking runners


def eq28_ssm_transition(dt: float, input_range: float = 3.0) -> CallableTransition:
    """Approximate-model transition sampling the generator's noise laws.

    The generator drives x3 with an unknown per-step input; the tracker
    has no model of it, so it widens the x3 noise with a uniform draw
    over the input's full range. Without that the particle cloud has no
    x3 diversity and the filter diverges during maneuvers.
    """
    F = np.array([[1.0, 2.0 * dt, dt * dt], [0.0, 1.0, dt], [0.0, 0.0, 1.0]])

    def fn(states, context, rng):
        noise = sample_process_noise(len(states), rng)
        noise[:, 2] += rng.uniform(-input_range, input_range, size=len(states))
        return states @ F.T + noise

    return CallableTransition(fn)


def state_region(windowed: bool, window: int = 3) -> FeasibleRegion:
    """x2 >= 0 and |x3| <= 10 on the newest frame."""
    n = 3 * window if windowed else 3
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    lower[-2], lower[-1], upper[-1] = 0.0, -10.0, 10.0
    return FeasibleRegion(lower, upper)


def benchmark_measurement_model(windowed: bool, window: int = 3) -> GaussianMeasurementModel:
    n = 3 * window if windowed else 3
    H = np.zeros((2, n))
    H[0, n - 3] = 1.0
    H[1, n - 2] = 1.0
    return GaussianMeasurementModel(H, np.diag([0.5, 0.5]))


def initial_particles(
    z0: np.ndarray, n: int, rng: np.random.Generator, windowed: bool, window: int = 3
) -> np.ndarray:
    frames = np.column_stack(
        [
            rng.normal(z0[0], np.sqrt(0.5), size=n),
            np.maximum(rng.normal(z0[1], np.sqrt(0.5), size=n), 0.0),
            rng.normal(0.0, np.sqrt(0.5), size=n),
        ]
    )
    if windowed:
        return np.tile(frames, (1, window))
    return frames


def track_trajectory(
    traj: LabeledTrajectory,
    transition: engine.TransitionModel,
    config: dict,
    rng: np.random.Generator,
    windowed: bool = False,
    context_trace: Optional[np.ndarray] = None,
    occluded_steps: Sequence[int] = (),
    n_components: int = 1,
) -> Tuple[np.ndarray, List[StepReport], MixtureBelief]:
    """Single-target CMSMC tracking; returns per-step mean estimates.

    Estimates are in the generator's 3-d state space regardless of
    whether the particle state carries a stacked window. With
    n_components > 1 the posterior is carried as a particle mixture and
    the estimate is the mixture mean, which cuts the Monte Carlo noise
    of the estimator without growing any single component. The final
    belief comes back too so a prediction rollout can continue from it.
    """
    window = config["evolution_window"]
    n = config["particles_per_component"]
    meas = benchmark_measurement_model(windowed, window)
    region = state_region(windowed, window)
    ecfg = EngineConfig(
        strategy=config["strategy"],
        particles_per_component=n,
        function_mode=engine.TRACKING,
        miss_distance=np.inf,
    )
    occluded = set(occluded_steps)

    comps = []
    for cid in range(n_components):
        states0 = initial_particles(traj.observations[0], n, rng, windowed, window)
        comps.append(uniform_component(cid, 1.0 / n_components, states0))
    belief = MixtureBelief(0, comps)
    models = {c.id: transition for c in comps}

    estimates = np.empty((len(traj), 3))
    estimates[0] = np.mean(
        [c.states[:, -3:].mean(axis=0) for c in comps], axis=0
    )
    reports = []
    for k in range(1, len(traj)):
        if k in occluded:
            frame = ObservationFrame(k, ())
        else:
            frame = ObservationFrame(k, (traj.observations[k],))
        context = None if context_trace is None else context_trace[k - 1]
        belief, report = engine.step(
            belief, frame, models, meas, ecfg, rng, context=context, region=region
        )
        models = {c.id: transition for c in belief.components}
        # mixture mean from the pre-resample per-component means and the
        # matching component weights, so the estimator skips both the
        # resampling noise and any reclustering churn
        if report.posterior_mean and report.pi:
            total = sum(report.pi.values())
            mean = np.zeros(3)
            for cid, m in report.posterior_mean.items():
                mean += (report.pi.get(cid, 0.0) / total) * m[-3:]
        else:
            total = sum(c.pi for c in belief.components)
            mean = (
                sum(c.pi * (c.weights @ c.states[:, -3:]) for c in belief.components)
                / total
            )
        estimates[k] = mean
        reports.append(report)
    return estimates, reports, belief


def track_and_predict(
    traj: LabeledTrajectory,
    model: HtspmModel,
    horizon: int,
    config: dict,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray, List[StepReport]]:
    """Track with the recognition-driven evolution model, then roll the
    final posterior forward `horizon` prediction-only steps.

    Returns (tracking estimates, predicted means, step reports); the
    predicted means are the t-step-ahead mixture means, t = 1..horizon.
    """
    window = config["evolution_window"]
    probs = recognition_trace(
        model.recognizer, recognizer_inputs(traj.observations, config["dt"])
    )
    transition = HtspmTransition(model)
    est, reports, belief = track_trajectory(
        traj, transition, config, rng, windowed=True, context_trace=probs
    )
    ecfg = EngineConfig(
        strategy=config["strategy"],
        particles_per_component=config["particles_per_component"],
        function_mode=engine.PREDICTION,
    )
    models = {c.id: transition for c in belief.components}
    rollout = engine.predict_rollout(
        belief, models, horizon, ecfg, rng,
        context=probs[-1], region=state_region(True, window),
    )
    predicted = np.array(
        [
            sum(c.pi * (c.weights @ c.states[:, -3:]) for c in b.components)
            for b in rollout
        ]
    )
    return est, predicted, reports


def ekf_track(traj: LabeledTrajectory, dt: float, use_ukf: bool = False) -> np.ndarray:
    model = eq28_model(dt)
    state = GaussianBeliefState(
        mean=np.array([traj.observations[0][0], traj.observations[0][1], 0.0]),
        covariance=np.diag([0.5, 0.5, 0.5]),
    )
    step_fn = ukf_step if use_ukf else ekf_step
    estimates = np.empty((len(traj), 3))
    estimates[0] = state.mean
    for k in range(1, len(traj)):
        state = step_fn(state, traj.observations[k], model)
        estimates[k] = state.mean
    return estimates


def _derived_rng(master_seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([master_seed, *keys])


def filter_comparison(
    test_data: Dict[str, List[LabeledTrajectory]],
    config: dict,
    per_step: Optional[dict] = None,
) -> Dict[str, np.ndarray]:
    """Per-dimension tracking MAE of CMSMC vs EKF vs UKF, averaged.

    Pass a dict as per_step to also collect the per-step absolute error
    profile (mean over trajectories, per dimension) for each filter.
    """
    dt = config["dt"]
    ssm = eq28_ssm_transition(dt)
    maes = {"cmsmc": [], "ekf": [], "ukf": []}
    errs = {k: [] for k in maes}
    for b_idx, behavior in enumerate(sorted(test_data)):
        for t_idx, traj in enumerate(test_data[behavior]):
            rng = _derived_rng(config["master_seed"], 10, b_idx, t_idx)
            est, _, _ = track_trajectory(
                traj, ssm, config, rng,
                n_components=config["mixture_components"],
            )
            runs = {
                "cmsmc": est,
                "ekf": ekf_track(traj, dt),
                "ukf": ekf_track(traj, dt, use_ukf=True),
            }
            for name, run in runs.items():
                maes[name].append(compute_mae(run, traj.states))
                if per_step is not None:
                    errs[name].append(np.abs(run - traj.states))
    if per_step is not None:
        for name in errs:
            per_step[name] = np.mean(errs[name], axis=0)
    return {k: np.mean(v, axis=0) for k, v in maes.items()}


def model_comparison(
    test_data: Dict[str, List[LabeledTrajectory]],
    models: BenchModels,
    config: dict,
) -> Dict[str, np.ndarray]:
    """Per-dimension tracking MAE of the evolution-model matrix."""
    window = config["evolution_window"]
    htspm_tr = HtspmTransition(models.htspm)
    ggmr_tr = PooledCgmrTransition(
        models.pooled, frame_dim=3,
        jitter=np.asarray(config["evolution_jitter"], dtype=float),
    )
    ssm = eq28_ssm_transition(config["dt"])
    maes = {"dhmm_cgmr": [], "ggmr": [], "ssm": []}
    for b_idx, behavior in enumerate(sorted(test_data)):
        for t_idx, traj in enumerate(test_data[behavior]):
            probs = recognition_trace(
                models.recognizer,
                recognizer_inputs(traj.observations, config["dt"]),
            )
            rng = _derived_rng(config["master_seed"], 20, b_idx, t_idx)
            est, _, _ = track_trajectory(
                traj, htspm_tr, config, rng, windowed=True, context_trace=probs
            )
            maes["dhmm_cgmr"].append(compute_mae(est, traj.states))
            rng = _derived_rng(config["master_seed"], 21, b_idx, t_idx)
            est, _, _ = track_trajectory(traj, ggmr_tr, config, rng, windowed=True)
            maes["ggmr"].append(compute_mae(est, traj.states))
            rng = _derived_rng(config["master_seed"], 22, b_idx, t_idx)
            est, _, _ = track_trajectory(traj, ssm, config, rng)
            maes["ssm"].append(compute_mae(est, traj.states))
    return {k: np.mean(v, axis=0) for k, v in maes.items()}


# ---------------------------------------------------------------------------
# Scenario presets (occlusion, birth/death, crossing)


def run_occlusion_scenario(
    seed: int, config: Optional[dict] = None, occlusion=(50, 61)
) -> Dict[str, np.ndarray]:
    """Single target, all measurements dropped for the occlusion window."""
    config = merged_config(config)
    spec = default_behavior_spec(config["dt"], config["sub_stage_duration"])
    from .scenario import generate_trajectory

    traj = generate_trajectory(spec, "I", seed=[seed, 77])
    rng = _derived_rng(seed, 30)
    est, reports, _ = track_trajectory(
        traj,
        eq28_ssm_transition(config["dt"]),
        config,
        rng,
        occluded_steps=range(*occlusion),
    )
    abs_err = np.abs(est - traj.states)
    return {"estimates": est, "truth": traj.states, "abs_error": abs_err}


class _DriftTransition(engine.TransitionModel):
    """(x, y, vx) random walk with per-particle velocity."""

    def __init__(self, q_pos=0.05, q_vel=0.01):
        self.q_pos = q_pos
        self.q_vel = q_vel

    def sample(self, states, context, rng):
        out = states.copy()
        out[:, 0] += states[:, 2] + rng.normal(0.0, self.q_pos, len(states))
        out[:, 1] += rng.normal(0.0, self.q_pos, len(states))
        out[:, 2] += rng.normal(0.0, self.q_vel, len(states))
        return out


def _planar_meas_model() -> GaussianMeasurementModel:
    return GaussianMeasurementModel(
        np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), 0.25 * np.eye(2)
    )


def run_birth_death_scenario(
    seed: int,
    n_steps: int = 90,
    birth_step: int = 30,
    death_step: int = 60,
) -> Dict[str, object]:
    """Second target appears at birth_step and last reports at death_step.

    Returns the step indices at which the engine added and removed the
    corresponding component.
    """
    rng = _derived_rng(seed, 40)
    meas = _planar_meas_model()
    cfg = EngineConfig(
        strategy=engine.ZERO_WEIGHT,
        particles_per_component=100,
        function_mode=engine.TRACKING,
        mixture_update_mode=engine.ADAPTIVE,
        pi_threshold=0.05,
        min_assigned_particles=10,
        merge_threshold=0.0,
        miss_distance=np.inf,
        spawn_state_defaults=np.zeros(3),
        spawn_observed_dims=(0, 1),
        spawn_covariance=np.diag([0.25, 0.25, 0.01]),
    )
    pos_a = np.zeros(2)
    pos_b = np.array([8.0, 0.0])
    states0 = np.column_stack(
        [
            rng.normal(pos_a[0], 0.5, 100),
            rng.normal(pos_a[1], 0.5, 100),
            rng.normal(0.0, 0.1, 100),
        ]
    )
    belief = MixtureBelief(0, [uniform_component(0, 1.0, states0)])
    transition = _DriftTransition()
    added_at, removed_at, counts = None, None, []
    for k in range(1, n_steps):
        zs = [pos_a + rng.normal(0, 0.5, 2)]
        if birth_step <= k <= death_step:
            zs.append(pos_b + rng.normal(0, 0.5, 2))
        frame = ObservationFrame(k, tuple(zs))
        models = {c.id: transition for c in belief.components}
        belief, report = engine.step(belief, frame, models, meas, cfg, rng)
        if report.added and added_at is None:
            added_at = k
        if report.removed and added_at is not None and removed_at is None:
            removed_at = k
        counts.append(belief.n_components)
    return {
        "added_at": added_at,
        "removed_at": removed_at,
        "component_counts": counts,
    }


def run_crossing_scenario(seed: int, n_steps: int = 60) -> Dict[str, object]:
    """Two targets cross in x while separated in y; d_th = 0.02."""
    rng = _derived_rng(seed, 50)
    meas = _planar_meas_model()
    cfg = EngineConfig(
        strategy=engine.ZERO_WEIGHT,
        particles_per_component=100,
        function_mode=engine.TRACKING,
        mixture_update_mode=engine.ADAPTIVE,
        pi_threshold=0.01,
        min_assigned_particles=5,
        merge_threshold=0.02,
        miss_distance=np.inf,
    )
    vel_a, vel_b = 0.5, -0.5
    pos_a = np.array([0.0, 0.0])
    pos_b = np.array([n_steps * 0.5, 5.0])

    def init(pos, vel):
        return np.column_stack(
            [
                rng.normal(pos[0], 0.5, 100),
                rng.normal(pos[1], 0.5, 100),
                rng.normal(vel, 0.05, 100),
            ]
        )

    belief = MixtureBelief(
        0,
        [
            uniform_component(0, 0.5, init(pos_a, vel_a)),
            uniform_component(1, 0.5, init(pos_b, vel_b)),
        ],
    )
    transition = _DriftTransition()
    counts = []
    for k in range(1, n_steps):
        za = pos_a + np.array([vel_a * k, 0.0]) + rng.normal(0, 0.5, 2)
        zb = pos_b + np.array([vel_b * k, 0.0]) + rng.normal(0, 0.5, 2)
        frame = ObservationFrame(k, (za, zb))
        models = {c.id: transition for c in belief.components}
        belief, report = engine.step(belief, frame, models, meas, cfg, rng)
        counts.append(belief.n_components)
    return {"component_counts": counts}


# ---------------------------------------------------------------------------
# Full experiment


def run_experiment(overrides: Optional[dict] = None) -> dict:
    """Generate data, train models, run the model matrix, report MAEs."""
    config = merged_config(overrides)
    spec = default_behavior_spec(config["dt"], config["sub_stage_duration"])
    t0 = time.time()
    train_data = make_dataset(
        spec, config["train_per_behavior"], config["master_seed"], "train"
    )
    test_data = make_dataset(
        spec, config["test_per_behavior"], config["master_seed"], "test"
    )
    report = {
        "config": config,
        "config_hash": config_hash(config),
        "mae": {},
        "timing": {},
    }
    if config["test_per_behavior"] == 0:
        report["timing"]["total_s"] = time.time() - t0
        return report

    t1 = time.time()
    models = train_benchmark_models(train_data, spec, config)
    report["timing"]["train_s"] = time.time() - t1

    t2 = time.time()
    per_step: dict = {}
    filt = filter_comparison(test_data, config, per_step=per_step)
    learned = model_comparison(test_data, models, config)
    report["timing"]["track_s"] = time.time() - t2
    for name, mae in {**learned, **filt}.items():
        report["mae"][name] = [float(v) for v in mae]
    report["per_step_error"] = {k: v.tolist() for k, v in per_step.items()}
    report["timing"]["total_s"] = time.time() - t0
    return report
