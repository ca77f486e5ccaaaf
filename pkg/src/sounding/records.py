"""
CSV intermediates between pipeline stages: detections, tracks and fixes.

Floats are written with repr so a read-back is exact, which keeps every
downstream stage bit-reproducible from the persisted files.
"""

import csv
from pathlib import Path
from typing import Callable, Dict, List, Sequence, TypeVar, Union

from ..core.errors import DataError, MissingFileError
from ..dsp.peaks import Detection
from ..tracking.localization import PositionFix
from ..tracking.tracker import TrackSnapshot

DETECTION_HEADER = ["cpi_start_s", "link", "delay_s", "doppler_hz", "snr_db"]
TRACK_HEADER = ["t_s", "link", "track_id", "status", "delay_s", "doppler_hz"]
FIX_HEADER = ["t_s", "x", "y", "z", "residual_m", "n_links"]

PathLike = Union[str, Path]
Row = TypeVar("Row")


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _write(path: PathLike, header: List[str], rows: Sequence[Dict]):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(row[key]) for key in header])


def _read(path: PathLike, header: List[str], build: Callable[[Dict[str, str]], Row]) -> List[Row]:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"{path} not found")
    with open(path, 'r', newline='') as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or list(reader.fieldnames) != header:
            raise DataError(f"{path}: expected header {','.join(header)}, found {reader.fieldnames}")
        rows = []
        for line, raw in enumerate(reader, start=2):
            try:
                rows.append(build(raw))
            except (TypeError, ValueError, KeyError):
                raise DataError(f"{path}:{line}: malformed row") from None
    return rows


def write_detections(detections: Sequence[Detection], path: PathLike):
    _write(path, DETECTION_HEADER, [d.to_dict() for d in detections])


def read_detections(path: PathLike) -> List[Detection]:
    return _read(path, DETECTION_HEADER, lambda r: Detection(
        link=int(r['link']),
        cpi_start_s=float(r['cpi_start_s']),
        delay_s=float(r['delay_s']),
        doppler_hz=float(r['doppler_hz']),
        snr_db=float(r['snr_db']),
    ))


def write_tracks(snapshots: Sequence[TrackSnapshot], path: PathLike):
    _write(path, TRACK_HEADER, [s.to_dict() for s in snapshots])


def read_tracks(path: PathLike) -> List[TrackSnapshot]:
    return _read(path, TRACK_HEADER, lambda r: TrackSnapshot(
        t_s=float(r['t_s']),
        link=int(r['link']),
        track_id=int(r['track_id']),
        status=r['status'],
        delay_s=float(r['delay_s']),
        doppler_hz=float(r['doppler_hz']),
    ))


def write_fixes(fixes: Sequence[PositionFix], path: PathLike):
    _write(path, FIX_HEADER, [fix.to_dict() for fix in fixes])


def read_fixes(path: PathLike) -> List[PositionFix]:
    return _read(path, FIX_HEADER, lambda r: PositionFix(
        t_s=float(r['t_s']),
        position=(float(r['x']), float(r['y']), float(r['z'])),
        residual_m=float(r['residual_m']),
        n_links=int(r['n_links']),
    ))
