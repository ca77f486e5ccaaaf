"""
Known pilot spectra for channel estimation.
"""

from math import gcd
from typing import Any, Dict, Mapping, Optional

import numpy as np

from ..core.errors import ConfigurationError
from ..core.streams import CfrStream

PILOT_KINDS = ("unit", "zadoff-chu")
DEFAULT_ZC_ROOT = 25


def zadoff_chu(n: int, root: int = DEFAULT_ZC_ROOT) -> np.ndarray:
    """Constant-modulus Zadoff-Chu sequence of length n."""
    if gcd(root, n) != 1:
        raise ConfigurationError(f"Zadoff-Chu root {root} must be coprime with length {n}", "$.pilot.root")
    k = np.arange(n)
    return np.exp(-1j * np.pi * root * k * (k + (n % 2)) / n)


def pilot_spectrum(entry: Optional[Mapping[str, Any]], n_subcarriers: int) -> np.ndarray:
    """Pilot described by a meta.json pilot entry; None means a unit pilot."""
    if entry is None:
        return np.ones(n_subcarriers, dtype=complex)
    kind = entry.get('kind', 'unit')
    if kind == 'unit':
        return np.ones(n_subcarriers, dtype=complex)
    if kind == 'zadoff-chu':
        return zadoff_chu(n_subcarriers, int(entry.get('root', DEFAULT_ZC_ROOT)))
    raise ConfigurationError(f"unknown pilot kind {kind!r}; expected one of {PILOT_KINDS}", "$.pilot.kind")


def pilot_entry(kind: str, root: int = DEFAULT_ZC_ROOT) -> Optional[Dict[str, Any]]:
    """meta.json pilot entry for a pilot kind."""
    if kind == 'unit':
        return None
    if kind == 'zadoff-chu':
        return {'kind': kind, 'root': root}
    raise ConfigurationError(f"unknown pilot kind {kind!r}; expected one of {PILOT_KINDS}")


def apply_pilot(stream: CfrStream, pilot: np.ndarray) -> CfrStream:
    """Received spectra rx = pilot * H for every snapshot and link."""
    data = (np.asarray(stream.data) * pilot[None, None, :]).astype(np.complex64)
    return CfrStream(data, stream.snapshot_rate_hz, stream.links, stream.carrier_hz,
                     stream.bandwidth_hz, first_index=stream.first_index, scenario=stream.scenario)
