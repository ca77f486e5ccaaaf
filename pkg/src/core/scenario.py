"""
Scene definition: nodes, links, targets, clutter and waveform grid.

All types are immutable after construction. ScenarioConfig maps 1:1 onto
the scenario JSON document (snake_case keys, SI units).
"""

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from config.isac_config import SPEED_OF_LIGHT, ChannelConfig
from .errors import ConfigurationError
from ..utils.validation import as_float, as_int, as_list, require_key, validate_scenario
from ..signature.reflectivity import ReflectivityTable, read_reflectivity_table, table_to_dict
from ..signature.rotor import RotorSpec

Vector3 = Tuple[float, float, float]
Signature = Union[complex, ReflectivityTable]

ROLES = ("tx", "rx", "txrx")
INTERPOLATIONS = ("linear", "cubic")


def _vector3(value: Any, path: str) -> Vector3:
    return tuple(as_float(v, f"{path}[{i}]") for i, v in enumerate(as_list(value, path, 3)))


def _complex(value: Any, path: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(as_float(value[0], f"{path}[0]"), as_float(value[1], f"{path}[1]"))
    raise ConfigurationError("expected a number or a [re, im] pair", path)


@dataclass(frozen=True, eq=False)
class TrajectorySpec:
    """Time-stamped waypoints with linear or natural cubic interpolation."""

    waypoints: Tuple[Tuple[float, Vector3], ...]
    interpolation: str = "linear"

    def __post_init__(self):
        """Validate waypoint ordering."""
        if len(self.waypoints) == 0:
            raise ConfigurationError("trajectory needs at least one waypoint")
        if self.interpolation not in INTERPOLATIONS:
            raise ConfigurationError(f"interpolation must be one of {INTERPOLATIONS}")
        if np.any(np.diff(self.times) <= 0):
            raise ConfigurationError("waypoint times must be strictly increasing")

    @classmethod
    def stationary(cls, position: Sequence[float]) -> "TrajectorySpec":
        """Single-waypoint trajectory."""
        return cls(waypoints=((0.0, tuple(float(p) for p in position)),))

    @cached_property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.waypoints], dtype=float)

    @cached_property
    def positions(self) -> np.ndarray:
        return np.array([p for _, p in self.waypoints], dtype=float).reshape(-1, 3)

    @property
    def is_stationary(self) -> bool:
        return len(self.waypoints) == 1

    @cached_property
    def spline(self) -> CubicSpline:
        return CubicSpline(self.times, self.positions, axis=0, bc_type="natural")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'waypoints': [{'t': t, 'position': list(p)} for t, p in self.waypoints],
            'interpolation': self.interpolation,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], path: str = "$") -> "TrajectorySpec":
        raw = require_key(data, 'waypoints', path)
        if not isinstance(raw, list) or not raw:
            raise ConfigurationError("trajectory needs at least one waypoint", f"{path}.waypoints")
        waypoints = []
        for i, wp in enumerate(raw):
            wp_path = f"{path}.waypoints[{i}]"
            waypoints.append((as_float(require_key(wp, 't', wp_path), f"{wp_path}.t"),
                              _vector3(require_key(wp, 'position', wp_path), f"{wp_path}.position")))
        try:
            return cls(tuple(waypoints), data.get('interpolation', 'linear'))
        except ConfigurationError as exc:
            raise exc.nested(path) from None


@dataclass(frozen=True, eq=False)
class NodeSpec:
    """A transceiver node with an isotropic antenna."""

    id: str
    role: str
    trajectory: TrajectorySpec
    antenna_gain_dbi: float = 0.0
    tx_power_dbm: float = 30.0

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigurationError(f"must be one of {ROLES}, got {self.role!r}", "role")

    @property
    def can_transmit(self) -> bool:
        return self.role in ("tx", "txrx")

    @property
    def can_receive(self) -> bool:
        return self.role in ("rx", "txrx")

    @property
    def antenna_gain_linear(self) -> float:
        return 10.0 ** (self.antenna_gain_dbi / 10.0)

    @property
    def tx_power_w(self) -> float:
        return 10.0 ** ((self.tx_power_dbm - 30.0) / 10.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.id,
            'role': self.role,
            'trajectory': self.trajectory.to_dict(),
            'antenna_gain_dbi': self.antenna_gain_dbi,
            'tx_power_dbm': self.tx_power_dbm,
        }


@dataclass(frozen=True)
class LinkSpec:
    """A directed Tx -> Rx link; tx_id == rx_id is a mono-static link."""

    tx_id: str
    rx_id: str

    @property
    def is_monostatic(self) -> bool:
        return self.tx_id == self.rx_id

    def to_dict(self) -> Dict[str, Any]:
        return {'tx_id': self.tx_id, 'rx_id': self.rx_id}


@dataclass(frozen=True, eq=False)
class TargetSpec:
    """A moving target with a reflectivity signature and an optional rotor."""

    id: str
    trajectory: TrajectorySpec
    signature_id: str
    rotor: Optional[RotorSpec] = None

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'id': self.id,
            'trajectory': self.trajectory.to_dict(),
            'signature_id': self.signature_id,
        }
        if self.rotor is not None:
            data['rotor'] = self.rotor.to_dict()
        return data


@dataclass(frozen=True)
class ClutterSpec:
    """Static point clusters drawn uniformly inside a box."""

    n_clusters: int = 0
    region_min: Vector3 = (0.0, 0.0, 0.0)
    region_max: Vector3 = (0.0, 0.0, 0.0)
    amplitude_db_range: Tuple[float, float] = (0.0, 0.0)
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 0:
            raise ConfigurationError("n_clusters must be >= 0", "$.clutter.n_clusters")
        if any(lo > hi for lo, hi in zip(self.region_min, self.region_max)):
            raise ConfigurationError("region min must not exceed max", "$.clutter.region")
        if self.amplitude_db_range[0] > self.amplitude_db_range[1]:
            raise ConfigurationError("amplitude range must be (min, max)", "$.clutter.amplitude_db_range")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_clusters': self.n_clusters,
            'region': {'min': list(self.region_min), 'max': list(self.region_max)},
            'amplitude_db_range': list(self.amplitude_db_range),
            'rng_seed': self.rng_seed,
        }


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Complete scene description."""

    nodes: Tuple[NodeSpec, ...]
    links: Tuple[LinkSpec, ...]
    targets: Tuple[TargetSpec, ...] = ()
    clutter: ClutterSpec = field(default_factory=ClutterSpec)
    carrier_hz: float = 3e9
    bandwidth_hz: float = 50e6
    n_subcarriers: int = 256
    snapshot_rate_hz: float = 1000.0
    duration_s: float = 1.0
    noise_power_dbm: float = -100.0
    signatures: Mapping[str, Signature] = field(default_factory=dict)
    rng_seed: int = ChannelConfig.RNG_SEED
    ground_truth_rate_hz: float = ChannelConfig.GROUND_TRUTH_RATE_HZ
    search_bounds: Optional[Tuple[Vector3, Vector3]] = None
    signature_sources: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        """Validate structure; soft checks live in utils.validation."""
        is_valid, errors = validate_scenario(self)
        if not is_valid:
            message, path = errors[0]
            raise ConfigurationError(message, path)

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def n_snapshots(self) -> int:
        return int(round(self.duration_s * self.snapshot_rate_hz))

    @property
    def max_unambiguous_delay_s(self) -> float:
        return self.n_subcarriers / self.bandwidth_hz

    @property
    def noise_power_w(self) -> float:
        return 10.0 ** ((self.noise_power_dbm - 30.0) / 10.0)

    @cached_property
    def node_index(self) -> Dict[str, NodeSpec]:
        return {node.id: node for node in self.nodes}

    def node(self, node_id: str) -> NodeSpec:
        return self.node_index[node_id]

    def signature(self, signature_id: str) -> Signature:
        return self.signatures[signature_id]

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        """Box used for the coarse localization grid search."""
        if self.search_bounds is not None:
            return np.asarray(self.search_bounds[0]), np.asarray(self.search_bounds[1])
        points = [node.trajectory.positions for node in self.nodes]
        if self.clutter.n_clusters:
            points.append(np.array([self.clutter.region_min, self.clutter.region_max]))
        stacked = np.vstack(points)
        return stacked.min(axis=0), stacked.max(axis=0)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        """Copy with a different noise seed."""
        return replace(self, rng_seed=int(seed))

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the JSON document layout."""
        data = {
            'nodes': [node.to_dict() for node in self.nodes],
            'links': [link.to_dict() for link in self.links],
            'targets': [target.to_dict() for target in self.targets],
            'clutter': self.clutter.to_dict(),
            'signatures': dict(self.signature_sources) or {
                key: ({'gain': [complex(v).real, complex(v).imag]}
                      if not isinstance(v, ReflectivityTable) else {'table': table_to_dict(v)})
                for key, v in self.signatures.items()},
            'carrier_hz': self.carrier_hz,
            'bandwidth_hz': self.bandwidth_hz,
            'n_subcarriers': self.n_subcarriers,
            'snapshot_rate_hz': self.snapshot_rate_hz,
            'duration_s': self.duration_s,
            'noise_power_dbm': self.noise_power_dbm,
            'rng_seed': self.rng_seed,
            'ground_truth_rate_hz': self.ground_truth_rate_hz,
        }
        if self.search_bounds is not None:
            data['search_bounds'] = {'min': list(self.search_bounds[0]),
                                     'max': list(self.search_bounds[1])}
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: Union[str, Path] = ".") -> "ScenarioConfig":
        """Build a scenario from its JSON document; errors name the offending JSON path."""
        base_dir = Path(base_dir)

        nodes = []
        raw_nodes = require_key(data, 'nodes', "$")
        if not isinstance(raw_nodes, list):
            raise ConfigurationError("expected a list", "$.nodes")
        for i, raw in enumerate(raw_nodes):
            path = f"$.nodes[{i}]"
            try:
                nodes.append(NodeSpec(
                    id=str(require_key(raw, 'id', path)),
                    role=str(require_key(raw, 'role', path)),
                    trajectory=TrajectorySpec.from_dict(require_key(raw, 'trajectory', path),
                                                        f"{path}.trajectory"),
                    antenna_gain_dbi=as_float(raw.get('antenna_gain_dbi', 0.0), f"{path}.antenna_gain_dbi"),
                    tx_power_dbm=as_float(raw.get('tx_power_dbm', 30.0), f"{path}.tx_power_dbm"),
                ))
            except ConfigurationError as exc:
                raise exc.nested(path) from None

        links = []
        for i, raw in enumerate(require_key(data, 'links', "$")):
            path = f"$.links[{i}]"
            links.append(LinkSpec(str(require_key(raw, 'tx_id', path)), str(require_key(raw, 'rx_id', path))))

        signature_sources = dict(data.get('signatures', {}))
        signatures: Dict[str, Signature] = {}
        for key, raw in signature_sources.items():
            path = f"$.signatures.{key}"
            if isinstance(raw, Mapping) and 'table' in raw:
                try:
                    signatures[key] = read_reflectivity_table(base_dir / raw['table'])
                except ConfigurationError as exc:
                    raise exc.nested(f"{path}.table") from None
            elif isinstance(raw, Mapping) and 'gain' in raw:
                signatures[key] = _complex(raw['gain'], f"{path}.gain")
            else:
                raise ConfigurationError("signature needs a 'gain' or a 'table' entry", path)

        targets = []
        for i, raw in enumerate(data.get('targets', [])):
            path = f"$.targets[{i}]"
            rotor = None
            if raw.get('rotor') is not None:
                r = raw['rotor']
                rpath = f"{path}.rotor"
                try:
                    rotor = RotorSpec(
                        n_blades=as_int(require_key(r, 'n_blades', rpath), f"{rpath}.n_blades"),
                        blade_radius_m=as_float(require_key(r, 'blade_radius_m', rpath), f"{rpath}.blade_radius_m"),
                        rotation_hz=as_float(require_key(r, 'rotation_hz', rpath), f"{rpath}.rotation_hz"),
                        plane_normal=_vector3(r.get('plane_normal', (0.0, 0.0, 1.0)),
                                              f"{rpath}.plane_normal"),
                        tip_amplitude=_complex(r.get('tip_amplitude', 1.0), f"{rpath}.tip_amplitude"),
                        phase0_rad=as_float(r.get('phase0_rad', 0.0), f"{rpath}.phase0_rad"),
                    )
                except ConfigurationError as exc:
                    raise exc.nested(path) from None
            targets.append(TargetSpec(
                id=str(require_key(raw, 'id', path)),
                trajectory=TrajectorySpec.from_dict(require_key(raw, 'trajectory', path), f"{path}.trajectory"),
                signature_id=str(require_key(raw, 'signature_id', path)),
                rotor=rotor,
            ))

        clutter = ClutterSpec()
        if data.get('clutter') is not None:
            c = data['clutter']
            region = c.get('region', {'min': [0, 0, 0], 'max': [0, 0, 0]})
            clutter = ClutterSpec(
                n_clusters=as_int(c.get('n_clusters', 0), "$.clutter.n_clusters"),
                region_min=_vector3(require_key(region, 'min', "$.clutter.region"), "$.clutter.region.min"),
                region_max=_vector3(require_key(region, 'max', "$.clutter.region"), "$.clutter.region.max"),
                amplitude_db_range=tuple(as_float(v, f"$.clutter.amplitude_db_range[{i}]") for i, v in enumerate(
                    as_list(c.get('amplitude_db_range', (0.0, 0.0)), "$.clutter.amplitude_db_range", 2))),
                rng_seed=as_int(c.get('rng_seed', 0), "$.clutter.rng_seed"),
            )

        search_bounds = None
        if data.get('search_bounds') is not None:
            sb = data['search_bounds']
            search_bounds = (_vector3(require_key(sb, 'min', "$.search_bounds"), "$.search_bounds.min"),
                             _vector3(require_key(sb, 'max', "$.search_bounds"), "$.search_bounds.max"))

        scalars = {}
        for key, cast in (('carrier_hz', as_float), ('bandwidth_hz', as_float), ('n_subcarriers', as_int),
                          ('snapshot_rate_hz', as_float), ('duration_s', as_float), ('noise_power_dbm', as_float)):
            scalars[key] = cast(require_key(data, key, "$"), f"$.{key}")

        return cls(
            nodes=tuple(nodes),
            links=tuple(links),
            targets=tuple(targets),
            clutter=clutter,
            signatures=signatures,
            signature_sources=signature_sources,
            rng_seed=as_int(data.get('rng_seed', ChannelConfig.RNG_SEED), "$.rng_seed"),
            ground_truth_rate_hz=as_float(data.get('ground_truth_rate_hz', ChannelConfig.GROUND_TRUTH_RATE_HZ),
                                          "$.ground_truth_rate_hz"),
            search_bounds=search_bounds,
            **scalars,
        )


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    """Read a scenario JSON file; signature tables resolve relative to it."""
    path = Path(path)
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON: {exc}", "$") from None
    return ScenarioConfig.from_dict(data, base_dir=path.parent)


def save_scenario(scenario: ScenarioConfig, path: Union[str, Path]):
    """Write a scenario JSON file."""
    with open(path, 'w') as f:
        json.dump(scenario.to_dict(), f, indent=2)
