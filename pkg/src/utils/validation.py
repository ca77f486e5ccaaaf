"""
Scenario validation and plausibility checking utilities.
"""

import logging
from typing import Any, List, Mapping, Optional, Set, Tuple

import numpy as np

from config.isac_config import SPEED_OF_LIGHT
from ..core.errors import ConfigurationError

LOGGER = logging.getLogger(__name__)

# (message, JSON path)
Issue = Tuple[str, str]

# Plausibility warnings already logged in this process
_warned: Set[str] = set()


def require_key(data: Mapping[str, Any], key: str, path: str) -> Any:
    """Value of a required key of a JSON object at path."""
    if not isinstance(data, Mapping):
        raise ConfigurationError("expected an object", path)
    if key not in data:
        raise ConfigurationError("missing required key", f"{path}.{key}")
    return data[key]


def as_float(value: Any, path: str) -> float:
    """A finite JSON number."""
    if isinstance(value, bool):
        raise ConfigurationError("expected a number", path)
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"expected a number, got {value!r}", path) from None
    if not np.isfinite(number):
        raise ConfigurationError("expected a finite number", path)
    return number


def as_int(value: Any, path: str) -> int:
    """A JSON integer; integral floats such as 3.0 are accepted."""
    number = as_float(value, path)
    if number != int(number):
        raise ConfigurationError(f"expected an integer, got {value!r}", path)
    return int(number)


def as_list(value: Any, path: str, length: Optional[int] = None) -> list:
    """A JSON array, optionally of a fixed length."""
    if not isinstance(value, (list, tuple)):
        raise ConfigurationError("expected a list", path)
    if length is not None and len(value) != length:
        raise ConfigurationError(f"expected a list of {length} values", path)
    return list(value)


def validate_scenario(scenario) -> Tuple[bool, List[Issue]]:
    """
    Validate the structure of a scenario.

    Returns:
        (is_valid, errors): validation result and (message, JSON path) pairs
    """
    errors: List[Issue] = []

    # Waveform grid
    if scenario.n_subcarriers < 2:
        errors.append(("must be >= 2", "$.n_subcarriers"))
    for key in ('carrier_hz', 'bandwidth_hz', 'snapshot_rate_hz', 'ground_truth_rate_hz'):
        if not getattr(scenario, key) > 0:
            errors.append(("must be positive", f"$.{key}"))
    if not scenario.duration_s >= 0:
        errors.append(("must be non-negative", "$.duration_s"))
    if not np.isfinite(scenario.noise_power_dbm):
        errors.append(("must be finite", "$.noise_power_dbm"))

    # Nodes
    seen = set()
    for i, node in enumerate(scenario.nodes):
        if node.id in seen:
            errors.append((f"duplicate node id {node.id!r}", f"$.nodes[{i}].id"))
        seen.add(node.id)
    if not any(node.can_transmit for node in scenario.nodes):
        errors.append(("at least one tx-capable node is required", "$.nodes"))
    if not any(node.can_receive for node in scenario.nodes):
        errors.append(("at least one rx-capable node is required", "$.nodes"))

    # Links
    nodes = {node.id: node for node in scenario.nodes}
    if not scenario.links:
        errors.append(("at least one link is required", "$.links"))
    for i, link in enumerate(scenario.links):
        tx, rx = nodes.get(link.tx_id), nodes.get(link.rx_id)
        if tx is None:
            errors.append((f"unknown node {link.tx_id!r}", f"$.links[{i}].tx_id"))
        elif not tx.can_transmit:
            errors.append((f"node {link.tx_id!r} cannot transmit", f"$.links[{i}].tx_id"))
        if rx is None:
            errors.append((f"unknown node {link.rx_id!r}", f"$.links[{i}].rx_id"))
        elif not rx.can_receive:
            errors.append((f"node {link.rx_id!r} cannot receive", f"$.links[{i}].rx_id"))
        if link.is_monostatic and tx is not None and tx.role != "txrx":
            errors.append(("mono-static links need a txrx node", f"$.links[{i}]"))

    # Targets
    seen = set()
    for i, target in enumerate(scenario.targets):
        if target.id in seen:
            errors.append((f"duplicate target id {target.id!r}", f"$.targets[{i}].id"))
        seen.add(target.id)
        if target.signature_id not in scenario.signatures:
            errors.append((f"unknown signature {target.signature_id!r}", f"$.targets[{i}].signature_id"))

    if scenario.search_bounds is not None:
        lo, hi = scenario.search_bounds
        if any(a > b for a, b in zip(lo, hi)):
            errors.append(("min must not exceed max", "$.search_bounds"))

    return len(errors) == 0, errors


def max_expected_doppler_hz(scenario, n_samples: int = 201) -> float:
    """Upper bound on |Doppler| from target, rotor tip and node speeds."""
    from ..core.geometry import velocity_at

    def max_speed(traj):
        if traj.is_stationary:
            return 0.0
        t = np.linspace(traj.times[0], traj.times[-1], n_samples)
        return float(np.max(np.linalg.norm(velocity_at(traj, t), axis=-1)))

    node_speed = max((max_speed(node.trajectory) for node in scenario.nodes), default=0.0)
    bound = 0.0
    for target in scenario.targets:
        speed = max_speed(target.trajectory)
        if target.rotor is not None:
            speed += 2.0 * np.pi * abs(target.rotor.rotation_hz) * target.rotor.blade_radius_m
        bound = max(bound, 2.0 * (speed + node_speed) * scenario.carrier_hz / SPEED_OF_LIGHT)
    return bound


def check_scenario_warnings(scenario) -> Tuple[bool, List[str]]:
    """
    Soft plausibility checks that do not stop a run.

    Returns:
        (is_clean, warnings): whether no warning applies and the warning messages
    """
    from ..core.geometry import bistatic_range, draw_clutter

    warnings = []

    nu_max = max_expected_doppler_hz(scenario)
    if scenario.snapshot_rate_hz < 2.0 * nu_max:
        warnings.append(
            f"snapshot rate {scenario.snapshot_rate_hz:g} Hz is below twice the maximum "
            f"expected Doppler ({nu_max:.1f} Hz); Doppler will alias")

    max_delay = scenario.max_unambiguous_delay_s
    node_pos = {node.id: node.trajectory.positions for node in scenario.nodes}
    clutter_pos, _ = draw_clutter(scenario.clutter)
    for link in scenario.links:
        tx, rx = node_pos[link.tx_id], node_pos[link.rx_id]
        scatterers = [clutter_pos] + [target.trajectory.positions for target in scenario.targets]
        longest = 0.0
        for points in scatterers:
            if len(points):
                # Node waypoints bound the node positions; take the worst pairing
                for tx_p in tx:
                    for rx_p in rx:
                        longest = max(longest, float(np.max(bistatic_range(tx_p, rx_p, points))))
        if longest / SPEED_OF_LIGHT > max_delay:
            warnings.append(
                f"link {link.tx_id}->{link.rx_id}: bistatic delay up to {longest / SPEED_OF_LIGHT * 1e9:.0f} ns "
                f"exceeds the unambiguous span {max_delay * 1e9:.0f} ns; echoes will wrap")

    if scenario.targets and scenario.duration_s > 0:
        for target in scenario.targets:
            end = float(target.trajectory.times[-1])
            if not target.trajectory.is_stationary and end < scenario.duration_s:
                warnings.append(f"target {target.id!r} trajectory ends at {end:g} s; position is held afterwards")

    for message in warnings:
        if message not in _warned:
            _warned.add(message)
            LOGGER.warning(message)
    return len(warnings) == 0, warnings
