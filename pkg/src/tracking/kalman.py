"""
Constant-velocity Kalman filter in per-link measurement space.

The state is x = (tau, tau_dot): bistatic delay in seconds and its rate in
s/s. Measurements are z = (tau, nu) with nu = -f_c * tau_dot.
"""

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Deque, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.stats import chi2

from config.isac_config import TrackerDefaults
from ..core.errors import ConfigurationError, NumericalError
from ..utils.validation import as_float, as_int, as_list

STATUSES = ("tentative", "confirmed", "coasting", "deleted")


def gate_threshold(probability: float = TrackerDefaults.GATE_PROBABILITY, dof: int = 2) -> float:
    """Mahalanobis^2 gate from the chi-square inverse CDF."""
    return float(chi2.ppf(probability, dof))


@dataclass(frozen=True)
class TrackerConfig:
    """Filter, gating and track-management parameters."""

    q_process: float = TrackerDefaults.Q_PROCESS
    r_meas: Tuple[Tuple[float, float], Tuple[float, float]] = (
        (TrackerDefaults.SIGMA_DELAY_S ** 2, 0.0),
        (0.0, TrackerDefaults.SIGMA_DOPPLER_HZ ** 2),
    )
    gate_threshold: float = field(default_factory=gate_threshold)
    confirm_m: int = TrackerDefaults.CONFIRM_M
    confirm_n: int = TrackerDefaults.CONFIRM_N
    delete_after_misses: int = TrackerDefaults.DELETE_AFTER_MISSES
    assigner: str = TrackerDefaults.ASSIGNER
    carrier_hz: Optional[float] = None
    delay_offsets_s: Tuple[float, ...] = ()
    # Map cell size (delay s, Doppler Hz); None disables the cell-based spawn exclusion
    resolution: Optional[Tuple[float, float]] = None
    spawn_exclusion_cells: float = TrackerDefaults.SPAWN_EXCLUSION_CELLS

    def __post_init__(self):
        """Validate parameters."""
        if not self.gate_threshold > 0:
            raise ConfigurationError("must be positive", "$.gate_threshold")
        if not 1 <= self.confirm_m <= self.confirm_n:
            raise ConfigurationError("need 1 <= M <= N", "$.confirm")
        if self.delete_after_misses < 1:
            raise ConfigurationError("must be >= 1", "$.delete_after_misses")
        if self.q_process < 0:
            raise ConfigurationError("must be >= 0", "$.q_process")
        r = self.r_matrix
        if r.shape != (2, 2) or not np.allclose(r, r.T):
            raise ConfigurationError("must be a symmetric 2x2 matrix", "$.r_meas")
        if self.assigner not in ("hungarian", "ilp"):
            raise ConfigurationError("must be 'hungarian' or 'ilp'", "$.assigner")
        if self.resolution is not None and (len(self.resolution) != 2 or min(self.resolution) <= 0):
            raise ConfigurationError("must be two positive cell sizes", "$.resolution")
        if self.spawn_exclusion_cells < 0:
            raise ConfigurationError("must be >= 0", "$.spawn_exclusion_cells")

    @property
    def r_matrix(self) -> np.ndarray:
        return np.asarray(self.r_meas, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'q_process': self.q_process,
            'r_meas': [list(row) for row in self.r_meas],
            'gate_threshold': self.gate_threshold,
            'confirm_m': self.confirm_m,
            'confirm_n': self.confirm_n,
            'delete_after_misses': self.delete_after_misses,
            'assigner': self.assigner,
            'carrier_hz': self.carrier_hz,
            'delay_offsets_s': list(self.delay_offsets_s),
            'resolution': None if self.resolution is None else list(self.resolution),
            'spawn_exclusion_cells': self.spawn_exclusion_cells,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrackerConfig":
        """Build from JSON; r_meas may be given as sigma_delay_s / sigma_doppler_hz."""
        if 'r_meas' in data:
            r_meas = tuple(
                tuple(as_float(v, f"$.r_meas[{i}][{j}]") for j, v in enumerate(as_list(row, f"$.r_meas[{i}]", 2)))
                for i, row in enumerate(as_list(data['r_meas'], "$.r_meas", 2)))
        else:
            sd = as_float(data.get('sigma_delay_s', TrackerDefaults.SIGMA_DELAY_S), "$.sigma_delay_s")
            sv = as_float(data.get('sigma_doppler_hz', TrackerDefaults.SIGMA_DOPPLER_HZ), "$.sigma_doppler_hz")
            r_meas = ((sd ** 2, 0.0), (0.0, sv ** 2))
        gate = data.get('gate_threshold')
        if gate is None:
            gate = gate_threshold(as_float(data.get('gate_probability', TrackerDefaults.GATE_PROBABILITY),
                                           "$.gate_probability"))
        carrier = data.get('carrier_hz')
        resolution = data.get('resolution')
        return cls(
            q_process=as_float(data.get('q_process', TrackerDefaults.Q_PROCESS), "$.q_process"),
            r_meas=r_meas,
            gate_threshold=as_float(gate, "$.gate_threshold"),
            confirm_m=as_int(data.get('confirm_m', TrackerDefaults.CONFIRM_M), "$.confirm_m"),
            confirm_n=as_int(data.get('confirm_n', TrackerDefaults.CONFIRM_N), "$.confirm_n"),
            delete_after_misses=as_int(data.get('delete_after_misses', TrackerDefaults.DELETE_AFTER_MISSES),
                                       "$.delete_after_misses"),
            assigner=str(data.get('assigner', TrackerDefaults.ASSIGNER)),
            carrier_hz=None if carrier is None else as_float(carrier, "$.carrier_hz"),
            delay_offsets_s=tuple(as_float(v, f"$.delay_offsets_s[{i}]") for i, v in enumerate(
                as_list(data.get('delay_offsets_s', ()), "$.delay_offsets_s"))),
            resolution=None if resolution is None else tuple(
                as_float(v, f"$.resolution[{i}]") for i, v in enumerate(as_list(resolution, "$.resolution", 2))),
            spawn_exclusion_cells=as_float(data.get('spawn_exclusion_cells', TrackerDefaults.SPAWN_EXCLUSION_CELLS),
                                           "$.spawn_exclusion_cells"),
        )


@dataclass(frozen=True, eq=False)
class TrackState:
    """A per-link track in (delay, delay-rate) space."""

    id: int
    x: np.ndarray
    P: np.ndarray
    status: str = "tentative"
    hits: Tuple[bool, ...] = (True,)
    last_update_s: float = 0.0
    link: int = 0
    misses: int = 0
    ever_confirmed: bool = False
    innovation: Optional[np.ndarray] = None
    innovation_cov: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ConfigurationError(f"track status must be one of {STATUSES}")

    @property
    def delay_s(self) -> float:
        return float(self.x[0])

    def doppler_hz(self, carrier_hz: float) -> float:
        return float(-carrier_hz * self.x[1])

    def record(self, hit: bool, window: int) -> Tuple[bool, ...]:
        """Hit history with a new entry, truncated to the last window entries."""
        history: Deque[bool] = deque(self.hits, maxlen=window)
        history.append(hit)
        return tuple(history)


def measurement_matrix(carrier_hz: float) -> np.ndarray:
    return np.array([[1.0, 0.0], [0.0, -carrier_hz]])


def process_noise(dt: float, q: float) -> np.ndarray:
    """White-noise acceleration covariance for a delay/delay-rate state."""
    return q * np.array([[dt ** 3 / 3.0, dt ** 2 / 2.0], [dt ** 2 / 2.0, dt]])


def initiate(track_id: int, delay_s: float, doppler_hz: float, t: float, config: TrackerConfig,
             carrier_hz: float, link: int = 0) -> TrackState:
    """New tentative track from one detection; Doppler gives the initial delay rate."""
    h_inv = np.linalg.inv(measurement_matrix(carrier_hz))
    x = h_inv @ np.array([delay_s, doppler_hz])
    P = h_inv @ config.r_matrix @ h_inv.T
    return TrackState(id=track_id, x=x, P=0.5 * (P + P.T), last_update_s=t, link=link)


def predict(track: TrackState, dt: float, q: float = TrackerDefaults.Q_PROCESS) -> TrackState:
    """Propagate the state by dt under the constant-velocity model."""
    if dt < 0:
        raise ConfigurationError("prediction interval must be >= 0")
    F = np.array([[1.0, dt], [0.0, 1.0]])
    P = F @ track.P @ F.T + process_noise(dt, q)
    return replace(track, x=F @ track.x, P=0.5 * (P + P.T))


def innovation(track: TrackState, z: Sequence[float], r_meas: np.ndarray,
               carrier_hz: float) -> Tuple[np.ndarray, np.ndarray]:
    """Innovation y = z - H x and its covariance S = H P H^T + R."""
    H = measurement_matrix(carrier_hz)
    y = np.asarray(z, dtype=float) - H @ track.x
    S = H @ track.P @ H.T + r_meas
    return y, 0.5 * (S + S.T)


def mahalanobis_sq(y: np.ndarray, S: np.ndarray) -> float:
    """y^T S^-1 y via a Cholesky factorization of S."""
    try:
        factor = linalg.cho_factor(S)
    except linalg.LinAlgError:
        raise NumericalError("innovation covariance is not positive definite; check r_meas") from None
    return float(y @ linalg.cho_solve(factor, y))


def update(track: TrackState, z: Sequence[float], r_meas: np.ndarray, carrier_hz: float) -> TrackState:
    """
    Optimal-gain update with measurement z = (delay_s, doppler_hz).

    The covariance uses the Joseph form and is symmetrized. The innovation
    and its covariance are kept on the returned track.
    """
    H = measurement_matrix(carrier_hz)
    y, S = innovation(track, z, r_meas, carrier_hz)
    try:
        factor = linalg.cho_factor(S)
    except linalg.LinAlgError:
        raise NumericalError("innovation covariance is not positive definite; check r_meas") from None

    K = linalg.cho_solve(factor, H @ track.P).T
    I_KH = np.eye(2) - K @ H
    P = I_KH @ track.P @ I_KH.T + K @ r_meas @ K.T
    return replace(track, x=track.x + K @ y, P=0.5 * (P + P.T), innovation=y, innovation_cov=S)
