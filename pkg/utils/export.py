"""CSV and JSON writers for trajectories, comparisons, sweeps and reports."""

from __future__ import annotations

import csv
import json
import logging
import os
from typing import Iterable, Sequence

import numpy as np
from pydantic import BaseModel

from utils.integrate import Trajectory, resample_nearest, time_grid

logger = logging.getLogger(__name__)

TRAJECTORY_HEADER = ("t", "y", "k", "u")


def format_float(value) -> str:
    """Shortest text that reads back to the same double."""
    return repr(float(value))


def write_rows(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    logger.debug(f"Wrote {path}")
    return path


def write_trajectory_csv(traj: Trajectory, path: str) -> str:
    """t,y,k,u per sample; u is left empty when the run has no input record."""
    def rows():
        for i, t in enumerate(traj.times):
            u = "" if traj.inputs is None else format_float(traj.inputs[i])
            yield format_float(t), format_float(traj.states[i, 0]), format_float(traj.states[i, 1]), u

    return write_rows(path, TRAJECTORY_HEADER, rows())


def write_json(data, path: str) -> str:
    """Write a model or plain data as indented, key-sorted JSON."""
    if isinstance(data, BaseModel):
        data = data.model_dump(mode="json")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    return path


def write_trajectory(traj: Trajectory, directory: str, stem: str = "trajectory") -> tuple[str, str]:
    """The CSV plus its JSON meta sidecar."""
    csv_path = write_trajectory_csv(traj, os.path.join(directory, f"{stem}.csv"))
    json_path = write_json(traj.meta, os.path.join(directory, f"{stem}.json"))
    return csv_path, json_path


def align_on_coarsest(runs: dict[str, Trajectory]) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Resample every run's y onto the full [t0, tf] grid of the run with the largest step.

    A run that stopped early (diverged) has NaN after its last sample; the
    other columns keep their full length.
    """
    if not runs:
        raise ValueError("nothing to align")
    coarsest = max(runs, key=lambda name: runs[name].meta.h)
    meta = runs[coarsest].meta
    grid, _ = time_grid(meta.t0, meta.tf, meta.h)
    columns = {}
    for name, traj in runs.items():
        values = resample_nearest(traj.times, traj.y, grid).astype(float)
        last = traj.times[-1]
        values[grid > last + 1e-9 * max(1.0, abs(last))] = np.nan
        columns[name] = values
    return grid, columns


def _cell(value) -> str:
    return "" if np.isnan(value) else format_float(value)


def write_comparison_csv(runs: dict[str, Trajectory], path: str) -> str:
    """t plus one y column per run; cells after a run's failure time are left empty."""
    grid, columns = align_on_coarsest(runs)
    names = list(runs)
    header = ["t", *(f"y_{name}" for name in names)]
    rows = (
        [format_float(t), *(_cell(columns[name][i]) for name in names)]
        for i, t in enumerate(grid)
    )
    return write_rows(path, header, rows)


def write_sweep_csv(points, path: str) -> str:
    return write_rows(
        path, ("omega", "error"), ((format_float(p.omega), format_float(p.error)) for p in points)
    )


if __name__ == "__main__":
    print(format_float(0.1), format_float(float("inf")))
