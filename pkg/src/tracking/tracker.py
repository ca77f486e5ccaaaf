"""
Per-link multi-target tracking with global nearest neighbour association.
"""

import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from ..core.errors import ConfigurationError, NumericalError, OrderingError
from ..dsp.peaks import Detection
from ..utils.runtime import parallel_map, timeit
from .assignment import Assignment, BaseAssigner, make_assigner
from .kalman import TrackerConfig, TrackState, initiate, measurement_matrix, predict, update

LOGGER = logging.getLogger(__name__)

# Track ids of link k start at k * ID_STRIDE
ID_STRIDE = 1_000_000


@dataclass(frozen=True)
class TrackSnapshot:
    """Reported state of one track at one CPI."""

    t_s: float
    link: int
    track_id: int
    status: str
    delay_s: float
    doppler_hz: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            't_s': self.t_s,
            'link': self.link,
            'track_id': self.track_id,
            'status': self.status,
            'delay_s': self.delay_s,
            'doppler_hz': self.doppler_hz,
        }


def gated_cost_matrix(tracks: Sequence[TrackState], detections: Sequence[Detection],
                      config: TrackerConfig, carrier_hz: float) -> np.ndarray:
    """Mahalanobis^2 between every track and detection; pairs outside the gate are inf."""
    cost = np.full((len(tracks), len(detections)), np.inf)
    if not len(tracks) or not len(detections):
        return cost

    z = np.array([[d.delay_s, d.doppler_hz] for d in detections])
    H = measurement_matrix(carrier_hz)
    for row, track in enumerate(tracks):
        S = H @ track.P @ H.T + config.r_matrix
        try:
            factor = linalg.cho_factor(S)
        except linalg.LinAlgError:
            raise NumericalError("innovation covariance is not positive definite; check r_meas") from None
        y = z - H @ track.x
        d2 = np.einsum('ij,ji->i', y, linalg.cho_solve(factor, y.T))
        cost[row] = np.where(d2 <= config.gate_threshold, d2, np.inf)
    return cost


def associate(tracks: Sequence[TrackState], detections: Sequence[Detection], config: TrackerConfig,
              carrier_hz: float, assigner: Optional[BaseAssigner] = None) -> Assignment:
    """
    Global nearest neighbour assignment of detections to tracks.

    Pairs outside the gate are never assigned. Unassigned detections are
    reported so the caller can start new tracks from them.
    """
    assigner = assigner or make_assigner(config.assigner)
    return assigner.solve(gated_cost_matrix(tracks, detections, config, carrier_hz))


class LinkTracker:
    """
    Sequential tracker for one link.

    Tracks that have been confirmed at least once choose detections first;
    tentative tracks compete for the rest. This keeps a fresh tentative track
    from stealing the detection of an established one. Leftover detections
    close to a live track do not start new tracks.
    """

    def __init__(self, link: int, config: TrackerConfig, carrier_hz: float):
        self.link = link
        self.config = config
        self.carrier_hz = carrier_hz
        self.assigner = make_assigner(config.assigner)
        self.tracks: List[TrackState] = []
        self.time_s: Optional[float] = None
        self._next_id = link * ID_STRIDE

    @property
    def n_started(self) -> int:
        return self._next_id - self.link * ID_STRIDE

    def _new_id(self) -> int:
        track_id = self._next_id
        self._next_id += 1
        return track_id

    def _hit(self, track: TrackState, detection: Detection, t: float) -> TrackState:
        cfg = self.config
        track = update(track, (detection.delay_s, detection.doppler_hz), cfg.r_matrix, self.carrier_hz)
        hits = track.record(True, cfg.confirm_n)
        confirmed = track.ever_confirmed or sum(hits) >= cfg.confirm_m
        return replace(track, hits=hits, misses=0, last_update_s=t,
                       status="confirmed" if confirmed else "tentative",
                       ever_confirmed=confirmed)

    def _miss(self, track: TrackState) -> TrackState:
        misses = track.misses + 1
        status = "deleted" if misses >= self.config.delete_after_misses else "coasting"
        return replace(track, hits=track.record(False, self.config.confirm_n), misses=misses, status=status)

    def _spawn(self, detection: Detection, t: float) -> TrackState:
        track = initiate(self._new_id(), detection.delay_s, detection.doppler_hz, t,
                         self.config, self.carrier_hz, link=self.link)
        if self.config.confirm_m <= 1:
            track = replace(track, status="confirmed", ever_confirmed=True)
        return track

    def _near_cell(self, points: np.ndarray, detection: Detection) -> bool:
        """Whether a detection lies within the exclusion box of any (delay, Doppler) point."""
        if self.config.resolution is None or not len(points):
            return False
        box = self.config.spawn_exclusion_cells * np.asarray(self.config.resolution)
        offset = np.abs(points - (detection.delay_s, detection.doppler_hz))
        return bool(np.any(np.all(offset <= box, axis=1)))

    def _spawnable(self, predicted: Sequence[TrackState], established: Sequence[int],
                   unassigned: Sequence[Detection]) -> List[Detection]:
        """
        Unassigned detections that may start tracks.

        A detection inside the gate of an established track, or within the
        exclusion box of any live track or of a stronger unassigned
        detection, is a second response of a target already followed.
        """
        if not unassigned:
            return []
        inside_gate = np.zeros(len(unassigned), dtype=bool)
        if established:
            cost = gated_cost_matrix([predicted[i] for i in established], unassigned,
                                     self.config, self.carrier_hz)
            inside_gate = np.isfinite(cost).any(axis=0)

        points = [(track.delay_s, track.doppler_hz(self.carrier_hz)) for track in predicted]
        accepted: List[Detection] = []
        for j in sorted(range(len(unassigned)), key=lambda j: -unassigned[j].snr_db):
            detection = unassigned[j]
            if inside_gate[j] or self._near_cell(np.array(points).reshape(-1, 2), detection):
                LOGGER.debug("link %d: detection at %.3e s absorbed by a live track", self.link,
                             detection.delay_s)
                continue
            accepted.append(detection)
            points.append((detection.delay_s, detection.doppler_hz))
        return accepted

    def step(self, detections: Sequence[Detection], t: float) -> List[TrackSnapshot]:
        """
        Advance every track to time t and fold in one CPI of detections.

        Returns snapshots of the tracks that have been confirmed and are
        still alive (confirmed or coasting).
        """
        if self.time_s is not None and t < self.time_s:
            raise OrderingError(f"link {self.link}: time went backwards ({t} < {self.time_s})")
        dt = 0.0 if self.time_s is None else t - self.time_s
        self.time_s = t

        predicted = [predict(track, dt, self.config.q_process) for track in self.tracks]
        established = [i for i, track in enumerate(predicted) if track.ever_confirmed]
        tentative = [i for i, track in enumerate(predicted) if not track.ever_confirmed]

        matched: Dict[int, int] = {}
        free = list(range(len(detections)))
        for group in (established, tentative):
            if not group or not free:
                continue
            result = associate([predicted[i] for i in group], [detections[j] for j in free],
                               self.config, self.carrier_hz, self.assigner)
            for row, col in result.pairs:
                matched[group[row]] = free[col]
            free = [free[col] for col in result.unassigned_detections]

        spawnable = self._spawnable(predicted, established, [detections[j] for j in free])

        survivors = []
        for i, track in enumerate(predicted):
            track = self._hit(track, detections[matched[i]], t) if i in matched else self._miss(track)
            if track.status != "deleted":
                survivors.append(track)
            else:
                LOGGER.debug("link %d: track %d deleted", self.link, track.id)
        for detection in spawnable:
            survivors.append(self._spawn(detection, t))
        self.tracks = survivors

        return [
            TrackSnapshot(t, self.link, track.id, track.status, track.delay_s,
                          track.doppler_hz(self.carrier_hz))
            for track in self.tracks if track.ever_confirmed
        ]


def _track_link(link: int, times: Sequence[float], by_time: Dict[float, List[Detection]],
                config: TrackerConfig, carrier_hz: float, time_offset_s: float) -> List[TrackSnapshot]:
    tracker = LinkTracker(link, config, carrier_hz)
    snapshots: List[TrackSnapshot] = []
    for cpi_start in times:
        snapshots.extend(tracker.step(by_time.get(cpi_start, []), cpi_start + time_offset_s))
    LOGGER.info("link %d: %d tracks started, %d alive at end", link, tracker.n_started, len(tracker.tracks))
    return snapshots


@timeit
def run_tracker(detections: Sequence[Detection], config: TrackerConfig,
                carrier_hz: Optional[float] = None, cpi_starts_s: Optional[Sequence[float]] = None,
                n_links: Optional[int] = None, time_offset_s: float = 0.0,
                threads: Optional[int] = None) -> List[TrackSnapshot]:
    """
    Track every link of a detection list.

    cpi_starts_s lists every processed CPI, including those without
    detections, so misses are counted; without it only CPIs that carry a
    detection are stepped. Snapshot times are CPI start plus time_offset_s.
    Links run in parallel; the output is ordered by (time, link, track id).
    """
    carrier = config.carrier_hz if config.carrier_hz is not None else carrier_hz
    if carrier is None:
        raise ConfigurationError("carrier frequency unknown; set carrier_hz in the tracker config",
                                 "$.carrier_hz")

    by_link: Dict[int, Dict[float, List[Detection]]] = {}
    for det in detections:
        by_link.setdefault(det.link, {}).setdefault(det.cpi_start_s, []).append(det)

    if n_links is None:
        n_links = max(by_link, default=-1) + 1
    extra = set() if cpi_starts_s is None else set(cpi_starts_s)

    def work(link: int) -> List[TrackSnapshot]:
        by_time = by_link.get(link, {})
        times = sorted(extra | set(by_time))
        return _track_link(link, times, by_time, config, carrier, time_offset_s)

    snapshots = [snap for per_link in parallel_map(work, range(n_links), threads=threads)
                 for snap in per_link]
    snapshots.sort(key=lambda s: (s.t_s, s.link, s.track_id))
    return snapshots
