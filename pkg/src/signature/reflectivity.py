"""
Tabulated complex bistatic reflectivity over (frequency, bistatic angle).

Tables are stored as a JSON header next to a raw little-endian float32
payload of interleaved (re, im) values, frequency-major.
"""

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..core.errors import ConfigurationError, MissingFileError, PayloadLengthError

LOGGER = logging.getLogger(__name__)

TABLE_FORMAT_VERSION = 1
PAYLOAD_DTYPE = np.dtype("<c8")

_clamp_warned = set()


@dataclass(frozen=True, eq=False)
class ReflectivityTable:
    """Complex linear reflectivity gains on a (frequency x bistatic angle) grid."""

    freq_grid_hz: np.ndarray
    angle_grid_deg: np.ndarray
    gains: np.ndarray
    polarization_tag: str = "unknown"
    source_path: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        """Validate grids and gain matrix."""
        freqs = np.asarray(self.freq_grid_hz, dtype=float)
        angles = np.asarray(self.angle_grid_deg, dtype=float)
        gains = np.asarray(self.gains, dtype=complex)
        object.__setattr__(self, 'freq_grid_hz', freqs)
        object.__setattr__(self, 'angle_grid_deg', angles)
        object.__setattr__(self, 'gains', gains)

        if freqs.ndim != 1 or angles.ndim != 1 or freqs.size < 2 or angles.size < 2:
            raise ConfigurationError("reflectivity table needs at least two points per grid axis")
        if np.any(np.diff(freqs) <= 0) or np.any(np.diff(angles) <= 0):
            raise ConfigurationError("reflectivity grids must be strictly ascending")
        if angles[0] < 0 or angles[-1] > 180:
            raise ConfigurationError("bistatic angles must lie in [0, 180] degrees")
        if gains.shape != (freqs.size, angles.size):
            raise ConfigurationError(
                f"gain matrix shape {gains.shape} does not match grids "
                f"({freqs.size}, {angles.size})")
        if not np.all(np.isfinite(gains)):
            raise ConfigurationError("reflectivity gains must be finite")

    @cached_property
    def _interpolator(self) -> RegularGridInterpolator:
        return RegularGridInterpolator(
            (self.freq_grid_hz, self.angle_grid_deg), self.gains, method="linear")

    def gain(self, f_hz, beta_deg):
        """Alias for reflectivity_lookup(self, f_hz, beta_deg)."""
        return reflectivity_lookup(self, f_hz, beta_deg)


def reflectivity_lookup(table: ReflectivityTable, f_hz, beta_deg):
    """
    Bilinear interpolation of the complex gain at (f_hz, beta_deg).

    Queries outside the grid are clamped to the nearest edge; the first
    clamp of a table is logged once per run. Scalars in, complex scalar out.
    """
    f = np.asarray(f_hz, dtype=float)
    beta = np.asarray(beta_deg, dtype=float)
    f, beta = np.broadcast_arrays(f, beta)

    f_clamped = np.clip(f, table.freq_grid_hz[0], table.freq_grid_hz[-1])
    beta_clamped = np.clip(beta, table.angle_grid_deg[0], table.angle_grid_deg[-1])
    if (np.any(f_clamped != f) or np.any(beta_clamped != beta)) and id(table) not in _clamp_warned:
        _clamp_warned.add(id(table))
        LOGGER.warning("reflectivity query outside table grid (%s); clamping to edge",
                       table.source_path or table.polarization_tag)

    points = np.stack([f_clamped.ravel(), beta_clamped.ravel()], axis=-1)
    values = table._interpolator(points).reshape(f.shape)
    if values.ndim == 0:
        return complex(values)
    return values


def write_reflectivity_table(table: ReflectivityTable, header_path: Union[str, Path]) -> Path:
    """Write the JSON header and the adjacent binary payload; returns the payload path."""
    header_path = Path(header_path)
    payload_path = header_path.with_suffix(".bin")
    header = {
        'format_version': TABLE_FORMAT_VERSION,
        'freq_grid_hz': table.freq_grid_hz.tolist(),
        'angle_grid_deg': table.angle_grid_deg.tolist(),
        'polarization_tag': table.polarization_tag,
        'shape': [int(table.freq_grid_hz.size), int(table.angle_grid_deg.size)],
        'data_file': payload_path.name,
    }
    with open(header_path, 'w') as f:
        json.dump(header, f, indent=2)
    table.gains.astype(PAYLOAD_DTYPE).tofile(payload_path)
    return payload_path


def read_reflectivity_table(header_path: Union[str, Path]) -> ReflectivityTable:
    """Load a table written by write_reflectivity_table."""
    header_path = Path(header_path)
    if not header_path.exists():
        raise MissingFileError(f"reflectivity header not found: {header_path}")
    with open(header_path, 'r') as f:
        header = json.load(f)

    if header.get('format_version') != TABLE_FORMAT_VERSION:
        raise ConfigurationError(
            f"unsupported reflectivity table version {header.get('format_version')}",
            "$.format_version")
    payload_path = header_path.parent / header['data_file']
    if not payload_path.exists():
        raise MissingFileError(f"reflectivity payload not found: {payload_path}")

    n_freq, n_angle = header['shape']
    expected = n_freq * n_angle * PAYLOAD_DTYPE.itemsize
    actual = payload_path.stat().st_size
    if actual != expected:
        raise PayloadLengthError(expected, actual, payload_path.name)

    gains = np.fromfile(payload_path, dtype=PAYLOAD_DTYPE).reshape(n_freq, n_angle)
    return ReflectivityTable(
        freq_grid_hz=np.asarray(header['freq_grid_hz'], dtype=float),
        angle_grid_deg=np.asarray(header['angle_grid_deg'], dtype=float),
        gains=gains.astype(complex),
        polarization_tag=header.get('polarization_tag', 'unknown'),
        source_path=str(header_path),
    )


def table_to_dict(table: ReflectivityTable) -> Dict[str, Any]:
    """Summary used in manifests; the gain matrix itself stays in the payload file."""
    return {
        'source_path': table.source_path,
        'polarization_tag': table.polarization_tag,
        'freq_range_hz': [float(table.freq_grid_hz[0]), float(table.freq_grid_hz[-1])],
        'angle_range_deg': [float(table.angle_grid_deg[0]), float(table.angle_grid_deg[-1])],
    }
