"""Particle mixture belief representation and weight bookkeeping.

States, observations and contexts are plain float ndarrays. A mixture
belief is a set of weighted components, each holding its own normalized
particle set; the component weight pi lives on the component, not on the
particles, so the two can never disagree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .errors import AllZeroWeights

# Sum-to-one tolerance for weights and component weights.
WEIGHT_TOL = 1e-9
# Raw-weight sums below this are treated as all-zero (underflow guard).
ZERO_SUM_FLOOR = 1e-300
# Added to fitted covariances before any determinant/inverse.
COV_JITTER = 1e-9


@dataclass(frozen=True)
class FeasibleRegion:
    """Axis-aligned box plus an optional extra membership predicate."""

    lower: np.ndarray
    upper: np.ndarray
    extra_predicate: Optional[Callable[[np.ndarray], bool]] = None

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape:
            raise ValueError("lower/upper bound shapes differ")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, states: np.ndarray) -> np.ndarray:
        """Vectorized membership test for an (n, d) batch of states."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        ok = np.all((states >= self.lower) & (states <= self.upper), axis=1)
        if self.extra_predicate is not None:
            for i in np.flatnonzero(ok):
                ok[i] = bool(self.extra_predicate(states[i]))
        return ok

    @staticmethod
    def unbounded(dim: int) -> "FeasibleRegion":
        return FeasibleRegion(np.full(dim, -np.inf), np.full(dim, np.inf))


@dataclass(frozen=True)
class Particle:
    """Single weighted state hypothesis (view onto a component's arrays)."""

    state: np.ndarray
    weight: float
    raw_weight: float
    component_id: int
    feasible: bool


@dataclass(frozen=True)
class ObservationFrame:
    """All measurements received at one time step; may be empty."""

    step: int
    measurements: tuple = ()

    def __post_init__(self):
        if self.step < 0:
            raise ValueError("step must be non-negative")
        meas = tuple(np.asarray(z, dtype=float) for z in self.measurements)
        object.__setattr__(self, "measurements", meas)

    def __len__(self) -> int:
        return len(self.measurements)


@dataclass
class MixtureComponent:
    """One posterior mode: a normalized particle set with weight pi.

    Particle data is stored columnwise (states (n, d), weights (n,), ...)
    so the per-step updates stay vectorized.
    """

    id: int
    pi: float
    states: np.ndarray
    weights: np.ndarray
    raw_weights: np.ndarray = None
    feasible: np.ndarray = None

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.raw_weights is None:
            self.raw_weights = self.weights.copy()
        else:
            self.raw_weights = np.asarray(self.raw_weights, dtype=float)
        if self.feasible is None:
            self.feasible = np.ones(len(self.weights), dtype=bool)
        else:
            self.feasible = np.asarray(self.feasible, dtype=bool)

    @property
    def n_particles(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def particles(self) -> Iterator[Particle]:
        for i in range(self.n_particles):
            yield Particle(
                state=self.states[i],
                weight=float(self.weights[i]),
                raw_weight=float(self.raw_weights[i]),
                component_id=self.id,
                feasible=bool(self.feasible[i]),
            )

    def validate(self) -> None:
        if not 0.0 <= self.pi <= 1.0 + WEIGHT_TOL:
            raise ValueError(f"component {self.id}: pi={self.pi} out of [0,1]")
        if abs(self.weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(
                f"component {self.id}: weights sum to {self.weights.sum()}"
            )
        if np.any(self.raw_weights < 0):
            raise ValueError(f"component {self.id}: negative raw weight")

    def copy(self) -> "MixtureComponent":
        return MixtureComponent(
            id=self.id,
            pi=self.pi,
            states=self.states.copy(),
            weights=self.weights.copy(),
            raw_weights=self.raw_weights.copy(),
            feasible=self.feasible.copy(),
        )


@dataclass
class MixtureBelief:
    """Weighted mixture of particle components at one time step."""

    step: int
    components: list = field(default_factory=list)

    def __post_init__(self):
        ids = [c.id for c in self.components]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate component ids: {ids}")
        if not self.components:
            raise ValueError("belief needs at least one component")

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def n_particles(self) -> int:
        return sum(c.n_particles for c in self.components)

    def component(self, cid: int) -> MixtureComponent:
        for c in self.components:
            if c.id == cid:
                return c
        raise KeyError(f"no component with id {cid}")

    def validate(self) -> None:
        total = sum(c.pi for c in self.components)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"component weights sum to {total}")
        for c in self.components:
            c.validate()

    def copy(self) -> "MixtureBelief":
        return MixtureBelief(self.step, [c.copy() for c in self.components])


def normalize_weights(raw_weights: np.ndarray) -> np.ndarray:
    """Normalize nonnegative raw weights to sum to one.

    Raises AllZeroWeights when the total mass underflows; the caller is
    expected to route that to the divergence alert rather than recover.
    """
    raw = np.asarray(raw_weights, dtype=float)
    if np.any(raw < 0):
        raise ValueError("raw weights must be nonnegative")
    total = raw.sum()
    if total < ZERO_SUM_FLOOR:
        raise AllZeroWeights("all raw weights are zero")
    return raw / total


def effective_sample_size(weights: np.ndarray) -> float:
    """1 / sum(w_i^2) for a normalized weight vector."""
    w = np.asarray(weights, dtype=float)
    return 1.0 / float(np.sum(w * w))


def systematic_resample(
    weights: np.ndarray, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Parent indices under systematic resampling.

    One uniform offset per call; stratum j probes the cumulative weight
    at (u + j) / count. Deterministic given the rng state.
    """
    w = np.asarray(weights, dtype=float)
    if count < 1:
        raise ValueError("count must be >= 1")
    positions = (rng.random() + np.arange(count)) / count
    cumulative = np.cumsum(w)
    cumulative[-1] = 1.0  # guard against rounding at the top
    return np.searchsorted(cumulative, positions, side="right")


def empirical_moments(component: MixtureComponent) -> tuple:
    """Weighted mean and symmetrized weighted covariance of a component."""
    w = component.weights
    x = component.states
    if w.sum() <= 0:
        raise ValueError("component has no positive weight")
    mean = w @ x
    centered = x - mean
    cov = (centered * w[:, None]).T @ centered
    cov = 0.5 * (cov + cov.T)
    return mean, cov


def belief_summary(belief: MixtureBelief) -> dict:
    """Per-component Gaussian summaries plus the overall mixture mean.

    Components are reported in descending pi order.
    """
    rows = []
    for c in sorted(belief.components, key=lambda c: -c.pi):
        mean, cov = empirical_moments(c)
        rows.append({"id": c.id, "pi": c.pi, "mean": mean, "covariance": cov})
    overall = sum(r["pi"] * r["mean"] for r in rows)
    return {"components": rows, "mean": overall}


def uniform_component(
    cid: int, pi: float, states: np.ndarray
) -> MixtureComponent:
    """Component with equal weights over the given states."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    n = states.shape[0]
    return MixtureComponent(
        id=cid, pi=pi, states=states, weights=np.full(n, 1.0 / n)
    )
