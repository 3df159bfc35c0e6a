"""Trajectory CSV export and ingestion.

One row per step. Fixed header: traj_id, step, state dims, observation
dims, then optional behavior/stage/sub_stage label columns. Numbers are
serialized with 17 significant digits so round trips are lossless.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import MissingColumn, ParseError
from .scenario import LabeledTrajectory

FLOAT_FMT = "%.17g"


def _header(state_dim: int, obs_dim: int, labeled: bool) -> List[str]:
    cols = ["traj_id", "step"]
    cols += [f"x{i}" for i in range(state_dim)]
    cols += [f"z{i}" for i in range(obs_dim)]
    if labeled:
        cols += ["behavior", "stage", "sub_stage"]
    return cols


def export_csv(trajectories: Sequence[LabeledTrajectory], path) -> None:
    path = Path(path)
    if not trajectories:
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerow(_header(3, 2, True))
        return
    state_dim = trajectories[0].states.shape[1]
    obs_dim = trajectories[0].observations.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_header(state_dim, obs_dim, True))
        for tid, traj in enumerate(trajectories):
            for k in range(len(traj)):
                behavior, stage, sub = traj.labels[k]
                row = [tid, k]
                row += [FLOAT_FMT % v for v in traj.states[k]]
                row += [FLOAT_FMT % v for v in traj.observations[k]]
                row += [behavior, stage, sub]
                writer.writerow(row)


def ingest_csv(
    path,
    state_dim: int = 3,
    obs_dim: int = 2,
    column_map: Optional[Dict[str, str]] = None,
) -> List[LabeledTrajectory]:
    """Parse a trajectory CSV back into LabeledTrajectory objects.

    column_map optionally renames expected columns to the file's actual
    header names. Rows are grouped by traj_id and steps must be strictly
    increasing within a trajectory.
    """
    path = Path(path)
    column_map = column_map or {}
    expected = _header(state_dim, obs_dim, labeled=False)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, no header") from None
        col_idx = {}
        for name in expected + ["behavior", "stage", "sub_stage"]:
            actual = column_map.get(name, name)
            if actual in header:
                col_idx[name] = header.index(actual)
            elif name in expected:
                raise MissingColumn(f"{path}: missing column {actual!r}")
        labeled = "behavior" in col_idx

        groups: Dict[str, dict] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                tid = row[col_idx["traj_id"]]
                step = int(row[col_idx["step"]])
                state = [float(row[col_idx[f"x{i}"]]) for i in range(state_dim)]
                obs = [float(row[col_idx[f"z{i}"]]) for i in range(obs_dim)]
            except (ValueError, IndexError) as e:
                raise ParseError(f"{path}: line {line_no}: {e}") from None
            g = groups.setdefault(
                tid, {"steps": [], "states": [], "obs": [], "labels": []}
            )
            if g["steps"] and step <= g["steps"][-1]:
                raise ParseError(
                    f"{path}: line {line_no}: step {step} not increasing"
                )
            g["steps"].append(step)
            g["states"].append(state)
            g["obs"].append(obs)
            if labeled:
                g["labels"].append(
                    (
                        row[col_idx["behavior"]],
                        row[col_idx["stage"]],
                        int(row[col_idx["sub_stage"]]),
                    )
                )
            else:
                g["labels"].append(("", "", 0))

    out = []
    for tid in groups:
        g = groups[tid]
        out.append(
            LabeledTrajectory(
                states=np.array(g["states"]),
                observations=np.array(g["obs"]),
                labels=g["labels"],
                behavior=g["labels"][0][0] if g["labels"] else "",
            )
        )
    return out
