"""
Position fixes from bistatic ranges of several links.

Each link constrains the target to an ellipsoid with the transmitter and
receiver at its foci. The fix minimizes the squared range residuals by
Gauss-Newton, started from a coarse grid search or a previous fix.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config.isac_config import SPEED_OF_LIGHT, TrackerDefaults
from ..core.errors import ConvergenceError, DegeneracyError, GeometryError
from ..core.geometry import COINCIDENT_TOL_M
from .tracker import TrackSnapshot

LOGGER = logging.getLogger(__name__)

MIN_LINKS = 3
MAX_CONDITION = 1e12
MAX_HALVINGS = 40

# Relative tolerance for a range lying on its baseline
BASELINE_RTOL = 1e-9

Bounds = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class BistaticMeasurement:
    """Bistatic range of one link with the positions of its end nodes."""

    range_m: float
    tx_pos: Tuple[float, float, float]
    rx_pos: Tuple[float, float, float]
    link: Optional[int] = None

    @property
    def baseline_m(self) -> float:
        return float(np.linalg.norm(np.subtract(self.tx_pos, self.rx_pos)))


@dataclass(frozen=True)
class PositionFix:
    """Estimated target position at one time."""

    t_s: float
    position: Tuple[float, float, float]
    residual_m: float
    n_links: int
    iterations: int = 0
    converged: bool = True

    def to_dict(self) -> Dict[str, Any]:
        x, y, z = self.position
        return {'t_s': self.t_s, 'x': x, 'y': y, 'z': z,
                'residual_m': self.residual_m, 'n_links': self.n_links}


def _arrays(measurements: Sequence[BistaticMeasurement]):
    ranges = np.array([m.range_m for m in measurements], dtype=float)
    tx = np.array([m.tx_pos for m in measurements], dtype=float)
    rx = np.array([m.rx_pos for m in measurements], dtype=float)
    return ranges, tx, rx


def range_residuals(p, measurements: Sequence[BistaticMeasurement]) -> np.ndarray:
    """R_i - |p - tx_i| - |p - rx_i| for one point (3,) or many points (..., 3)."""
    ranges, tx, rx = _arrays(measurements)
    p = np.asarray(p, dtype=float)[..., None, :]
    model = np.linalg.norm(p - tx, axis=-1) + np.linalg.norm(p - rx, axis=-1)
    return ranges - model


def _jacobian(p: np.ndarray, tx: np.ndarray, rx: np.ndarray) -> np.ndarray:
    """Rows u_tx + u_rx: gradient of each modelled bistatic range."""
    d_tx, d_rx = p - tx, p - rx
    n_tx = np.linalg.norm(d_tx, axis=1, keepdims=True)
    n_rx = np.linalg.norm(d_rx, axis=1, keepdims=True)
    if np.any(n_tx < COINCIDENT_TOL_M) or np.any(n_rx < COINCIDENT_TOL_M):
        raise GeometryError("iterate coincides with a node; range gradient undefined")
    return d_tx / n_tx + d_rx / n_rx


def _rms(residuals: np.ndarray) -> float:
    return float(np.sqrt(np.mean(residuals ** 2)))


def _check_geometry(measurements: Sequence[BistaticMeasurement]):
    if len(measurements) < MIN_LINKS:
        raise DegeneracyError(f"need at least {MIN_LINKS} links, got {len(measurements)}")
    on_baseline = [abs(m.range_m - m.baseline_m) <= BASELINE_RTOL * max(1.0, m.baseline_m)
                   for m in measurements]
    if all(on_baseline):
        raise DegeneracyError("every range equals its baseline; the position is not determined")


def measurement_bounds(measurements: Sequence[BistaticMeasurement]) -> Bounds:
    """Box around the nodes, padded by the largest range."""
    _, tx, rx = _arrays(measurements)
    nodes = np.vstack([tx, rx])
    pad = max(m.range_m for m in measurements) / 2.0
    return nodes.min(axis=0) - pad, nodes.max(axis=0) + pad


def grid_search(measurements: Sequence[BistaticMeasurement], bounds: Optional[Bounds] = None,
                points_per_axis: int = TrackerDefaults.GRID_POINTS_PER_AXIS) -> np.ndarray:
    """Grid point of a box with the smallest sum of squared range residuals."""
    lo, hi = bounds if bounds is not None else measurement_bounds(measurements)
    axes = [np.linspace(lo[k], hi[k], points_per_axis) for k in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, 3)
    cost = np.sum(range_residuals(grid, measurements) ** 2, axis=-1)
    return grid[int(np.argmin(cost))]


def localize(measurements: Sequence[BistaticMeasurement], initial_guess=None,
             bounds: Optional[Bounds] = None, t_s: float = 0.0,
             tolerance_m: float = TrackerDefaults.LOCALIZE_TOLERANCE_M,
             max_iterations: int = TrackerDefaults.LOCALIZE_MAX_ITERATIONS) -> PositionFix:
    """
    Least-squares position from three or more bistatic ranges.

    Gauss-Newton with step halving, so the cost never increases. Stops when
    a step is shorter than tolerance_m. Without an initial guess the start
    point comes from grid_search over bounds.

    Raises:
        DegeneracyError: fewer than three links, every range on its baseline,
            or ill-conditioned normal equations
        ConvergenceError: no converged step within max_iterations; carries
            the last fix and its residual
    """
    _check_geometry(measurements)
    ranges, tx, rx = _arrays(measurements)

    p = np.asarray(initial_guess, dtype=float) if initial_guess is not None \
        else grid_search(measurements, bounds)
    residuals = range_residuals(p, measurements)
    cost = float(residuals @ residuals)

    for iteration in range(1, max_iterations + 1):
        J = _jacobian(p, tx, rx)
        normal = J.T @ J
        if np.linalg.cond(normal) > MAX_CONDITION:
            raise DegeneracyError("normal equations are singular; links do not constrain the position")
        step = np.linalg.solve(normal, J.T @ residuals)

        scale = 1.0
        for _ in range(MAX_HALVINGS):
            candidate = p + scale * step
            trial = range_residuals(candidate, measurements)
            trial_cost = float(trial @ trial)
            if trial_cost <= cost:
                break
            scale *= 0.5
        else:
            candidate, trial, trial_cost = p, residuals, cost

        moved = float(np.linalg.norm(candidate - p))
        p, residuals, cost = candidate, trial, trial_cost
        if moved < tolerance_m:
            return PositionFix(t_s, tuple(float(v) for v in p), _rms(residuals), len(measurements), iteration)

    fix = PositionFix(t_s, tuple(float(v) for v in p), _rms(residuals), len(measurements),
                      max_iterations, converged=False)
    raise ConvergenceError(f"no convergence after {max_iterations} iterations", fix, fix.residual_m)


def _pick_track(snapshots: Sequence[TrackSnapshot]) -> TrackSnapshot:
    """Prefer confirmed over coasting, then the oldest track."""
    return min(snapshots, key=lambda s: (s.status != "confirmed", s.track_id))


def fuse_tracks(snapshots: Sequence[TrackSnapshot],
                link_geometry: Mapping[int, Tuple[Sequence[float], Sequence[float]]],
                bounds: Optional[Bounds] = None,
                delay_offsets_s: Sequence[float] = ()) -> List[PositionFix]:
    """
    Position fixes from per-link track snapshots.

    At each time one track per link is used; times with fewer than three
    links give no fix. Ranges are c * (delay - offset). Each fix warm-starts
    from the previous one; the first starts from a grid search. Times that
    fail to localize are skipped with a warning.
    """
    by_time: Dict[float, Dict[int, List[TrackSnapshot]]] = {}
    for snap in snapshots:
        if snap.link in link_geometry:
            by_time.setdefault(snap.t_s, {}).setdefault(snap.link, []).append(snap)

    fixes: List[PositionFix] = []
    previous = None
    for t in sorted(by_time):
        measurements = []
        for link in sorted(by_time[t]):
            track = _pick_track(by_time[t][link])
            offset = delay_offsets_s[link] if link < len(delay_offsets_s) else 0.0
            tx, rx = link_geometry[link]
            measurements.append(BistaticMeasurement(
                SPEED_OF_LIGHT * (track.delay_s - offset), tuple(tx), tuple(rx), link))
        if len(measurements) < MIN_LINKS:
            continue
        try:
            fix = localize(measurements, initial_guess=previous, bounds=bounds, t_s=t)
        except (DegeneracyError, ConvergenceError, GeometryError) as exc:
            LOGGER.warning("no fix at t=%.3f s: %s", t, exc)
            continue
        fixes.append(fix)
        previous = fix.position

    LOGGER.info("%d position fixes from %d track times", len(fixes), len(by_time))
    return fixes
