"""
Kinematics and bistatic geometry: trajectory interpolation, bistatic range,
Doppler and angle, and illuminator selection.

All functions accept single 3-vectors or stacked arrays of shape (..., 3).
"""

from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from config.isac_config import SPEED_OF_LIGHT
from .errors import GeometryError
from .scenario import ClutterSpec, NodeSpec, TrajectorySpec

# Distances below this are treated as coincident positions
COINCIDENT_TOL_M = 1e-9


def position_at(traj: TrajectorySpec, t) -> np.ndarray:
    """
    Position on a trajectory at time t (scalar or array).

    Times outside the waypoint span are clamped, so the first or last
    position is held.
    """
    t_clamped = np.clip(np.asarray(t, dtype=float), traj.times[0], traj.times[-1])
    if traj.is_stationary:
        return np.broadcast_to(traj.positions[0], t_clamped.shape + (3,)).copy()
    if traj.interpolation == "cubic":
        return traj.spline(t_clamped)
    return np.stack(
        [np.interp(t_clamped, traj.times, traj.positions[:, axis]) for axis in range(3)],
        axis=-1,
    )


def velocity_at(traj: TrajectorySpec, t) -> np.ndarray:
    """
    Analytic derivative of the trajectory interpolant at time t.

    Beyond the waypoint span the one-sided derivative at the boundary is
    returned. On an interior waypoint of a linear trajectory the slope of
    the following segment is used.
    """
    t_clamped = np.clip(np.asarray(t, dtype=float), traj.times[0], traj.times[-1])
    if traj.is_stationary:
        return np.zeros(t_clamped.shape + (3,))
    if traj.interpolation == "cubic":
        return traj.spline(t_clamped, 1)

    slopes = np.diff(traj.positions, axis=0) / np.diff(traj.times)[:, None]
    segment = np.searchsorted(traj.times, t_clamped, side="right") - 1
    segment = np.clip(segment, 0, len(slopes) - 1)
    return slopes[segment]


def bistatic_range(tx_pos, rx_pos, target_pos) -> np.ndarray:
    """Two-leg path length |target - tx| + |target - rx| in meters."""
    target_pos = np.asarray(target_pos, dtype=float)
    leg_tx = np.linalg.norm(target_pos - np.asarray(tx_pos, dtype=float), axis=-1)
    leg_rx = np.linalg.norm(target_pos - np.asarray(rx_pos, dtype=float), axis=-1)
    return leg_tx + leg_rx


def _unit_vectors(origin, target_pos) -> np.ndarray:
    diff = np.asarray(target_pos, dtype=float) - np.asarray(origin, dtype=float)
    norm = np.linalg.norm(diff, axis=-1, keepdims=True)
    if np.any(norm < COINCIDENT_TOL_M):
        raise GeometryError("target coincides with a node; bistatic direction undefined")
    return diff / norm


def bistatic_range_rate(tx_pos, rx_pos, target_pos, target_vel,
                        tx_vel=None, rx_vel=None) -> np.ndarray:
    """Time derivative of the bistatic range in m/s."""
    target_vel = np.asarray(target_vel, dtype=float)
    rel_tx = target_vel - (0.0 if tx_vel is None else np.asarray(tx_vel, dtype=float))
    rel_rx = target_vel - (0.0 if rx_vel is None else np.asarray(rx_vel, dtype=float))
    u_tx = _unit_vectors(tx_pos, target_pos)
    u_rx = _unit_vectors(rx_pos, target_pos)
    return np.sum(rel_tx * u_tx, axis=-1) + np.sum(rel_rx * u_rx, axis=-1)


def bistatic_doppler(tx_pos, rx_pos, target_pos, target_vel, carrier_hz: float,
                     tx_vel=None, rx_vel=None) -> np.ndarray:
    """
    Bistatic Doppler shift in Hz.

    nu = -(f_c / c) * dR/dt, so a shrinking bistatic range gives a positive
    Doppler. Node velocities default to zero.
    """
    rate = bistatic_range_rate(tx_pos, rx_pos, target_pos, target_vel, tx_vel, rx_vel)
    return -(carrier_hz / SPEED_OF_LIGHT) * rate


def bistatic_angle(tx_pos, rx_pos, target_pos) -> np.ndarray:
    """Angle at the target between the directions to Tx and Rx, in degrees (0 = monostatic)."""
    u_tx = _unit_vectors(target_pos, tx_pos)
    u_rx = _unit_vectors(target_pos, rx_pos)
    cosine = np.clip(np.sum(u_tx * u_rx, axis=-1), -1.0, 1.0)
    return np.degrees(np.arccos(cosine))


def select_illuminator(nodes: Sequence[NodeSpec], target_pos, target_vel,
                       carrier_hz: float, t: float = 0.0) -> Tuple[str, Dict[str, float]]:
    """
    Choose the transmitting node that avoids Doppler blindness best.

    Every tx-capable node is tried as illuminator with all other rx-capable
    nodes as receivers; the node whose weakest link has the largest |Doppler|
    wins. Returns the node id and the per-receiver Doppler for that choice.
    """
    best_id: Optional[str] = None
    best_score = -np.inf
    best_dopplers: Dict[str, float] = {}

    for tx in nodes:
        if not tx.can_transmit:
            continue
        tx_pos = position_at(tx.trajectory, t)
        tx_vel = velocity_at(tx.trajectory, t)
        dopplers = {}
        for rx in nodes:
            if rx.id == tx.id or not rx.can_receive:
                continue
            dopplers[rx.id] = float(bistatic_doppler(
                tx_pos, position_at(rx.trajectory, t), target_pos, target_vel,
                carrier_hz, tx_vel, velocity_at(rx.trajectory, t)))
        if not dopplers:
            continue
        score = min(abs(v) for v in dopplers.values())
        if score > best_score:
            best_id, best_score, best_dopplers = tx.id, score, dopplers

    if best_id is None:
        raise GeometryError("no tx-capable node has a separate receiver")
    return best_id, best_dopplers


def draw_clutter(clutter: ClutterSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw static clutter clusters from the clutter seed.

    Positions are uniform in the region box. Gains are log-uniform in the
    configured dB range with uniform phase; 0 dB is a point scatterer with
    unit linear reflectivity. The same seed always yields the same draw.
    """
    rng = np.random.default_rng(clutter.rng_seed)
    lo = np.asarray(clutter.region_min, dtype=float)
    hi = np.asarray(clutter.region_max, dtype=float)
    positions = lo + (hi - lo) * rng.random((clutter.n_clusters, 3))
    db_lo, db_hi = clutter.amplitude_db_range
    gains_db = rng.uniform(db_lo, db_hi, clutter.n_clusters)
    phases = rng.uniform(0.0, 2.0 * np.pi, clutter.n_clusters)
    return positions, 10.0 ** (gains_db / 20.0) * np.exp(1j * phases)


def link_delay_doppler(tx_pos, rx_pos, target_pos, target_vel, carrier_hz: float,
                       tx_vel=None, rx_vel=None) -> Tuple[np.ndarray, np.ndarray]:
    """Bistatic delay (s) and Doppler (Hz) of a scatterer on one link."""
    delay = bistatic_range(tx_pos, rx_pos, target_pos) / SPEED_OF_LIGHT
    doppler = bistatic_doppler(tx_pos, rx_pos, target_pos, target_vel, carrier_hz, tx_vel, rx_vel)
    return delay, doppler


def link_truth(scenario, link, target, t) -> Tuple[np.ndarray, np.ndarray]:
    """Ground-truth (delay, Doppler) of a scenario target on a link at time(s) t."""
    tx = scenario.node(link.tx_id).trajectory
    rx = scenario.node(link.rx_id).trajectory
    return link_delay_doppler(
        position_at(tx, t), position_at(rx, t),
        position_at(target.trajectory, t), velocity_at(target.trajectory, t),
        scenario.carrier_hz, velocity_at(tx, t), velocity_at(rx, t))
