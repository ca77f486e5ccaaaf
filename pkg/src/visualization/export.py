"""
File exports for delay-Doppler maps and run manifests.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np

from ..dsp.maps import DelayDopplerMap

LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]

# Floor applied before taking dB of empty cells
_POWER_FLOOR = 1e-30


def map_db(z: DelayDopplerMap) -> np.ndarray:
    """Map power in dB."""
    return 10.0 * np.log10(np.maximum(z.power, _POWER_FLOOR))


def map_basename(z: DelayDopplerMap, cpi: int, stage: str = "map") -> str:
    return f"{stage}_link{z.link}_cpi{cpi:05d}"


def export_map_csv(z: DelayDopplerMap, filename: PathLike):
    """
    Map power in dB as CSV.

    The first row holds the Doppler axis in Hz, the first column the delay
    axis in seconds.
    """
    power_db = map_db(z)
    with open(filename, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(["delay_s\\doppler_hz"] + [repr(float(v)) for v in z.doppler_axis_hz])
        for delay, row in zip(z.delay_axis_s, power_db):
            writer.writerow([repr(float(delay))] + [f"{v:.3f}" for v in row])


def export_map_pgm(z: DelayDopplerMap, filename: PathLike, dynamic_range_db: Optional[float] = None):
    """
    Map power as an 8-bit binary PGM image.

    Rows are delay bins, columns Doppler bins. The dB map is min-max scaled:
    its minimum is 0 and its maximum 255. With dynamic_range_db only the top
    dynamic_range_db of the map span the gray scale and lower cells are 0.
    A flat map is all 0.
    """
    power_db = map_db(z)
    top = float(np.max(power_db))
    bottom = float(np.min(power_db)) if dynamic_range_db is None else top - dynamic_range_db
    span = top - bottom
    scaled = np.clip((power_db - bottom) / span, 0.0, 1.0) if span > 0 else np.zeros_like(power_db)
    pixels = np.round(255.0 * scaled).astype(np.uint8)
    rows, cols = pixels.shape
    with open(filename, 'wb') as f:
        f.write(f"P5\n{cols} {rows}\n255\n".encode('ascii'))
        f.write(pixels.tobytes())


def export_json(data: Mapping[str, Any], filename: PathLike):
    with open(filename, 'w') as f:
        json.dump(data, f, indent=2)


def load_json(filename: PathLike) -> Dict[str, Any]:
    with open(filename, 'r') as f:
        return json.load(f)


class MapExporter:
    """Map sink writing CSV and PGM (and optionally PNG) files per exported CPI."""

    def __init__(self, directory: PathLike, plot: bool = False):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.plot = plot
        self.count = 0

    def __call__(self, z: DelayDopplerMap, residual: DelayDopplerMap):
        cpi = int(round(z.cpi_start_s / (1.0 / z.doppler_bin_hz)))
        for stage, item in (("map", z), ("residual", residual)):
            base = self.directory / map_basename(item, cpi, stage)
            export_map_csv(item, base.with_suffix(".csv"))
            export_map_pgm(item, base.with_suffix(".pgm"))
            if self.plot:
                from .plotter import plot_map, save_figure
                save_figure(plot_map(item), base.with_suffix(".png"))
        self.count += 1
