"""Synthetic benchmark generator.

A three-dimensional nonlinear state-space process whose third coordinate
is driven by a per-sub-stage forcing term g(k). Behaviors are ordered
stage triples, stages are ordered sub-stage pairs, and the schedule is
fixed so that behaviors II and III share their entire first stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

# State constraints enforced by projection during generation.
X2_MIN = 0.0
X3_LIMIT = 10.0


@dataclass
class BehaviorSpec:
    sub_stage_g: Dict[int, Callable[[int], float]]
    stages: Dict[str, Tuple[int, int]]
    behaviors: Dict[str, Tuple[str, str, str]]
    sub_stage_duration: int = 40
    dt: float = 0.1

    def __post_init__(self):
        if self.sub_stage_duration < 1:
            raise ValueError("sub_stage_duration must be >= 1")
        for stage, subs in self.stages.items():
            for s in subs:
                if s not in self.sub_stage_g:
                    raise ValueError(f"stage {stage} references unknown sub-stage {s}")
        for b, stages in self.behaviors.items():
            for s in stages:
                if s not in self.stages:
                    raise ValueError(f"behavior {b} references unknown stage {s}")

    def total_duration(self, behavior: str) -> int:
        return len(self.behaviors[behavior]) * 2 * self.sub_stage_duration

    def schedule(self, behavior: str) -> List[Tuple[str, str, int]]:
        """Per-step (behavior, stage, sub-stage) triples."""
        out = []
        for stage in self.behaviors[behavior]:
            for sub in self.stages[stage]:
                out.extend([(behavior, stage, sub)] * self.sub_stage_duration)
        return out


def default_behavior_spec(dt: float = 0.1, sub_stage_duration: int = 40) -> BehaviorSpec:
    """The benchmark hierarchy: 4 behaviors, 5 stages, 6 sub-stages.

    Behaviors II and III both open with stage B, which creates the
    ambiguity window the recognizer tests rely on.
    """
    return BehaviorSpec(
        sub_stage_g={
            1: lambda k: 1.5,
            2: lambda k: 1.5 * math.cos(0.1 * k),
            3: lambda k: -0.75,
            4: lambda k: 3.0 * math.sin(0.1 * k),
            5: lambda k: -3.0,
            6: lambda k: 3.0,
        },
        stages={"A": (1, 2), "B": (3, 4), "C": (5, 6), "D": (2, 3), "E": (4, 5)},
        behaviors={
            "I": ("A", "B", "C"),
            "II": ("B", "C", "D"),
            "III": ("B", "D", "E"),
            "IV": ("D", "E", "A"),
        },
        sub_stage_duration=sub_stage_duration,
        dt=dt,
    )


@dataclass
class LabeledTrajectory:
    states: np.ndarray  # (L, 3)
    observations: np.ndarray  # (L, 2)
    labels: List[Tuple[str, str, int]]
    behavior: str = ""

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.observations = np.atleast_2d(np.asarray(self.observations, dtype=float))
        if not (len(self.states) == len(self.observations) == len(self.labels)):
            raise ValueError("states/observations/labels lengths differ")

    def __len__(self) -> int:
        return len(self.states)


def propagate_state(
    state: np.ndarray, g: float, dt: float, noise: Sequence[float] = (0.0, 0.0, 0.0)
) -> np.ndarray:
    """One step of the generator dynamics with constraint projection."""
    x1, x2, x3 = state
    v1, v2, v3 = noise
    nxt = np.array(
        [
            x1 + 2.0 * x2 * dt + x3 * dt * dt + v1,
            x2 + x3 * dt + v2,
            x3 + g + v3,
        ]
    )
    nxt[1] = max(nxt[1], X2_MIN)
    nxt[2] = min(max(nxt[2], -X3_LIMIT), X3_LIMIT)
    return nxt


def generate_trajectory(
    spec: BehaviorSpec,
    behavior: str,
    seed,
    length: Optional[int] = None,
    noise: bool = True,
) -> LabeledTrajectory:
    """Simulate one labeled trajectory of the given behavior.

    Deterministic per seed. noise=False zeroes both process and
    measurement noise (used by the hand-value tests).
    """
    if behavior not in spec.behaviors:
        raise ValueError(f"behavior {behavior!r} not in spec")
    schedule = spec.schedule(behavior)
    if length is None:
        length = len(schedule)
    if length > len(schedule):
        raise ValueError("length exceeds the behavior's total duration")
    rng = np.random.default_rng(seed)

    states = np.empty((length, 3))
    observations = np.empty((length, 2))
    states[0] = [
        rng.uniform(0.0, 20.0),
        rng.uniform(10.0, 20.0),
        rng.normal(0.0, math.sqrt(0.1)),
    ]
    if not noise:
        states[0] = [0.0, 10.0, 0.0]
    for k in range(1, length):
        _, _, sub = schedule[k - 1]
        g = spec.sub_stage_g[sub](k - 1)
        if noise:
            v = (
                rng.normal(0.0, math.sqrt(0.5)),
                rng.uniform(-1.0, 1.0),
                rng.uniform(-0.1, 0.1),
            )
        else:
            v = (0.0, 0.0, 0.0)
        states[k] = propagate_state(states[k - 1], g, spec.dt, v)
    if noise:
        w = rng.normal(0.0, math.sqrt(0.5), size=(length, 2))
    else:
        w = np.zeros((length, 2))
    observations[:, 0] = states[:, 0] + w[:, 0]
    observations[:, 1] = states[:, 1] + w[:, 1]
    return LabeledTrajectory(
        states=states,
        observations=observations,
        labels=schedule[:length],
        behavior=behavior,
    )


def sample_process_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """The generator's process noise laws, as an (n, 3) batch."""
    return np.column_stack(
        [
            rng.normal(0.0, math.sqrt(0.5), size=n),
            rng.uniform(-1.0, 1.0, size=n),
            rng.uniform(-0.1, 0.1, size=n),
        ]
    )


def make_dataset(
    spec: BehaviorSpec,
    per_behavior: int,
    master_seed: int,
    split: str = "train",
) -> Dict[str, List[LabeledTrajectory]]:
    """Per-behavior trajectory lists with order-independent seed derivation."""
    split_tag = {"train": 0, "validation": 1, "test": 2}[split]
    out: Dict[str, List[LabeledTrajectory]] = {}
    for b_idx, behavior in enumerate(sorted(spec.behaviors)):
        out[behavior] = [
            generate_trajectory(
                spec, behavior, seed=[master_seed, split_tag, b_idx, i]
            )
            for i in range(per_behavior)
        ]
    return out
