"""
Stream containers for channel frequency responses and ground truth.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, SizeError

FORMAT_VERSION = 1
CFR_DTYPE = np.dtype("<c8")

LinkIds = Tuple[str, str]


@dataclass(frozen=True, eq=False)
class CfrSnapshot:
    """All link responses at one snapshot time; responses has shape (n_links, n_subcarriers)."""

    t_s: float
    index: int
    responses: np.ndarray

    @property
    def n_links(self) -> int:
        return self.responses.shape[0]

    @property
    def n_subcarriers(self) -> int:
        return self.responses.shape[1]

    def link(self, link_index: int) -> np.ndarray:
        return self.responses[link_index]


class CfrStream:
    """
    Ordered CFR snapshots at 1/snapshot_rate_hz spacing.

    The backing array has shape (n_snapshots, n_links, n_subcarriers) and may
    be an in-memory array or a read-only memory map of a container payload.
    Snapshot i has timestamp (first_index + i) / snapshot_rate_hz.
    """

    def __init__(self, data: np.ndarray, snapshot_rate_hz: float, links: Sequence[LinkIds],
                 carrier_hz: float, bandwidth_hz: float, first_index: int = 0, scenario=None):
        if data.ndim != 3:
            raise SizeError(f"CFR data must be 3-D (snapshot, link, subcarrier), got shape {data.shape}")
        if data.shape[1] != len(links):
            raise SizeError(f"CFR data has {data.shape[1]} links, {len(links)} link ids given")
        if not snapshot_rate_hz > 0:
            raise ConfigurationError("snapshot rate must be positive")
        self.data = data
        self.snapshot_rate_hz = float(snapshot_rate_hz)
        self.links = tuple(tuple(link) for link in links)
        self.carrier_hz = float(carrier_hz)
        self.bandwidth_hz = float(bandwidth_hz)
        self.first_index = int(first_index)
        self.scenario = scenario

    @property
    def n_snapshots(self) -> int:
        return self.data.shape[0]

    @property
    def n_links(self) -> int:
        return self.data.shape[1]

    @property
    def n_subcarriers(self) -> int:
        return self.data.shape[2]

    @property
    def timestamps(self) -> np.ndarray:
        return (self.first_index + np.arange(self.n_snapshots)) / self.snapshot_rate_hz

    def __len__(self) -> int:
        return self.n_snapshots

    def snapshot(self, i: int) -> CfrSnapshot:
        return CfrSnapshot(
            t_s=(self.first_index + i) / self.snapshot_rate_hz,
            index=self.first_index + i,
            responses=np.asarray(self.data[i]),
        )

    def __iter__(self) -> Iterator[CfrSnapshot]:
        for i in range(self.n_snapshots):
            yield self.snapshot(i)

    def block(self, start: int, stop: int, link_index: Optional[int] = None) -> np.ndarray:
        """Copy of snapshots [start, stop), optionally for one link only."""
        if link_index is None:
            return np.array(self.data[start:stop])
        return np.array(self.data[start:stop, link_index])

    def metadata(self, node_positions: Optional[Mapping[str, Any]] = None,
                 pilot: Optional[Mapping[str, Any]] = None) -> "DatasetMeta":
        """Container header describing this stream."""
        return DatasetMeta(
            carrier_hz=self.carrier_hz,
            bandwidth_hz=self.bandwidth_hz,
            n_subcarriers=self.n_subcarriers,
            n_snapshots=self.n_snapshots,
            n_links=self.n_links,
            snapshot_rate_hz=self.snapshot_rate_hz,
            links=self.links,
            node_positions=dict(node_positions or {}),
            pilot=dict(pilot) if pilot else None,
        )


@dataclass
class DatasetMeta:
    """Header of an on-disk CFR container (meta.json)."""

    carrier_hz: float
    bandwidth_hz: float
    n_subcarriers: int
    n_snapshots: int
    n_links: int
    snapshot_rate_hz: float
    links: Tuple[LinkIds, ...]
    node_positions: Dict[str, Any] = field(default_factory=dict)
    pilot: Optional[Dict[str, Any]] = None
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        """Validate counts."""
        self.links = tuple(tuple(link) for link in self.links)
        if len(self.links) != self.n_links:
            raise ConfigurationError(
                f"{len(self.links)} links listed but n_links = {self.n_links}", "$.links")
        for key in ('n_subcarriers', 'n_snapshots', 'n_links'):
            if getattr(self, key) < 0:
                raise ConfigurationError("must be non-negative", f"$.{key}")

    @property
    def payload_bytes(self) -> int:
        return self.n_snapshots * self.n_links * self.n_subcarriers * CFR_DTYPE.itemsize

    def stationary_position(self, node_id: str) -> np.ndarray:
        """Position of a node listed with fixed coordinates."""
        entry = self.node_positions.get(node_id)
        if not isinstance(entry, (list, tuple)) or len(entry) != 3:
            raise ConfigurationError(f"no fixed position recorded for node {node_id!r}",
                                     f"$.node_positions.{node_id}")
        return np.asarray(entry, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'format_version': self.format_version,
            'carrier_hz': self.carrier_hz,
            'bandwidth_hz': self.bandwidth_hz,
            'n_subcarriers': self.n_subcarriers,
            'n_snapshots': self.n_snapshots,
            'n_links': self.n_links,
            'snapshot_rate_hz': self.snapshot_rate_hz,
            'links': [list(link) for link in self.links],
            'node_positions': self.node_positions,
        }
        if self.pilot is not None:
            data['pilot'] = self.pilot
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DatasetMeta":
        try:
            return cls(
                carrier_hz=float(data['carrier_hz']),
                bandwidth_hz=float(data['bandwidth_hz']),
                n_subcarriers=int(data['n_subcarriers']),
                n_snapshots=int(data['n_snapshots']),
                n_links=int(data['n_links']),
                snapshot_rate_hz=float(data['snapshot_rate_hz']),
                links=tuple(tuple(link) for link in data['links']),
                node_positions=dict(data.get('node_positions', {})),
                pilot=data.get('pilot'),
                format_version=int(data['format_version']),
            )
        except KeyError as exc:
            raise ConfigurationError("missing required key", f"$.{exc.args[0]}") from None


@dataclass(frozen=True)
class GroundTruthRecord:
    """One ground-truth sample of a target."""

    t_s: float
    target_id: str
    position: Tuple[float, float, float]
    velocity: Optional[Tuple[float, float, float]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            't_s': self.t_s,
            'target_id': self.target_id,
            'position': list(self.position),
            'velocity': None if self.velocity is None else list(self.velocity),
        }


def group_by_target(records: Sequence[GroundTruthRecord]) -> Dict[str, List[GroundTruthRecord]]:
    """Split ground truth into per-target lists, keeping file order."""
    grouped: Dict[str, List[GroundTruthRecord]] = {}
    for record in records:
        grouped.setdefault(record.target_id, []).append(record)
    return grouped
