"""
Ground-truth sampling, CSV persistence and interpolation.
"""

import csv
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.errors import DataError, InsufficientDataError, OrderingError
from ..core.geometry import position_at, velocity_at
from ..core.streams import GroundTruthRecord, group_by_target

GT_HEADER = ["t_s", "target_id", "x", "y", "z", "vx", "vy", "vz"]


def sample_ground_truth(scenario, rate_hz: Optional[float] = None) -> List[GroundTruthRecord]:
    """Target states on a regular grid over the scenario duration, time-major."""
    rate_hz = rate_hz or scenario.ground_truth_rate_hz
    n = int(np.floor(scenario.duration_s * rate_hz + 1e-9)) + 1
    times = np.arange(n) / rate_hz
    records = []
    per_target = [(target.id, position_at(target.trajectory, times), velocity_at(target.trajectory, times))
                  for target in scenario.targets]
    for i, t in enumerate(times):
        for target_id, positions, velocities in per_target:
            records.append(GroundTruthRecord(
                float(t), target_id, tuple(map(float, positions[i])), tuple(map(float, velocities[i]))))
    return records


def write_ground_truth_csv(records: Sequence[GroundTruthRecord], path: Union[str, Path]):
    """Write gt.csv; a missing velocity leaves the v columns empty."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(GT_HEADER)
        for r in records:
            velocity = [repr(float(v)) for v in r.velocity] if r.velocity is not None else ["", "", ""]
            writer.writerow([repr(float(r.t_s)), r.target_id] + [repr(float(p)) for p in r.position] + velocity)


def read_ground_truth_csv(path: Union[str, Path]) -> List[GroundTruthRecord]:
    """Read gt.csv and check per-target time ordering."""
    records = []
    with open(path, 'r', newline='') as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or list(reader.fieldnames)[:5] != GT_HEADER[:5]:
            raise DataError(f"{path}: unexpected ground truth header {reader.fieldnames}")
        for line, row in enumerate(reader, start=2):
            try:
                position = (float(row['x']), float(row['y']), float(row['z']))
                velocity = None
                if row.get('vx') not in (None, ""):
                    velocity = (float(row['vx']), float(row['vy']), float(row['vz']))
                records.append(GroundTruthRecord(float(row['t_s']), row['target_id'], position, velocity))
            except (TypeError, ValueError):
                raise DataError(f"{path}:{line}: malformed ground truth row") from None

    for target_id, rows in group_by_target(records).items():
        times = np.array([r.t_s for r in rows])
        if np.any(np.diff(times) < 0):
            raise OrderingError(f"{path}: timestamps of target {target_id!r} decrease")
    return records


def interpolate_ground_truth(gt: Sequence[GroundTruthRecord], t,
                             target_id: Optional[str] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Position and velocity of one target at time(s) t.

    Position is linearly interpolated and clamped to the record span.
    Velocity comes from the records when present, otherwise from the
    slope between the neighbouring records.
    """
    rows = [r for r in gt if target_id is None or r.target_id == target_id]
    if not rows:
        raise InsufficientDataError("ground truth is empty" if target_id is None
                                    else f"no ground truth for target {target_id!r}")
    if target_id is None and len({r.target_id for r in rows}) > 1:
        raise DataError("ground truth holds several targets; pass target_id")

    times = np.array([r.t_s for r in rows], dtype=float)
    if np.any(np.diff(times) < 0):
        raise OrderingError("ground truth timestamps decrease")
    # Keep the last of repeated timestamps
    keep = np.append(np.diff(times) > 0, True)
    rows = [r for r, k in zip(rows, keep) if k]
    times = times[keep]
    positions = np.array([r.position for r in rows], dtype=float)

    t = np.asarray(t, dtype=float)
    t_clamped = np.clip(t, times[0], times[-1])
    position = np.stack([np.interp(t_clamped, times, positions[:, a]) for a in range(3)], axis=-1)

    if all(r.velocity is not None for r in rows):
        velocities = np.array([r.velocity for r in rows], dtype=float)
        velocity = np.stack([np.interp(t_clamped, times, velocities[:, a]) for a in range(3)], axis=-1)
    elif len(rows) == 1:
        velocity = np.zeros(t.shape + (3,))
    else:
        slopes = np.diff(positions, axis=0) / np.diff(times)[:, None]
        segment = np.clip(np.searchsorted(times, t_clamped, side="right") - 1, 0, len(slopes) - 1)
        velocity = slopes[segment]
    return position, velocity
