"""
Pipeline performance against ground truth.

Truth is converted to per-link (delay, Doppler) at the center of every CPI,
detections are matched to it inside a gate, and the matches, track
snapshots and position fixes are aggregated into an EvalReport.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from config.isac_config import EvalDefaults
from ..core.geometry import link_delay_doppler
from ..core.streams import GroundTruthRecord, group_by_target
from ..dsp.peaks import Detection
from ..sounding.ground_truth import interpolate_ground_truth
from ..tracking.localization import PositionFix
from ..tracking.tracker import TrackSnapshot

LOGGER = logging.getLogger(__name__)

LinkGeometry = Mapping[int, Tuple[Sequence[float], Sequence[float]]]


@dataclass(frozen=True)
class TruthPoint:
    """Ground-truth (delay, Doppler) of one target on one link at one CPI."""

    link: int
    cpi_start_s: float
    target_id: str
    delay_s: float
    doppler_hz: float
    visible: bool = True


@dataclass(frozen=True)
class Match:
    detection: Detection
    truth: TruthPoint

    @property
    def delay_error_s(self) -> float:
        return self.detection.delay_s - self.truth.delay_s

    @property
    def doppler_error_hz(self) -> float:
        return self.detection.doppler_hz - self.truth.doppler_hz


@dataclass
class MatchResult:
    """Outcome of matching detections against truth."""

    matches: List[Match] = field(default_factory=list)
    misses: List[TruthPoint] = field(default_factory=list)
    false_alarms: List[Detection] = field(default_factory=list)

    def extend(self, other: "MatchResult"):
        self.matches.extend(other.matches)
        self.misses.extend(other.misses)
        self.false_alarms.extend(other.false_alarms)


def truth_points(gt: Sequence[GroundTruthRecord], link_geometry: LinkGeometry, carrier_hz: float,
                 cpi_starts_s: Sequence[float], time_offset_s: float = 0.0,
                 notch_halfwidth_hz: float = 0.0,
                 snr_db: Optional[Mapping[Tuple[int, str], np.ndarray]] = None,
                 min_snr_db: float = EvalDefaults.MIN_VISIBLE_SNR_DB) -> List[TruthPoint]:
    """
    Per-link truth at cpi_start + time_offset_s for every target and CPI.

    A target is visible when its Doppler lies outside the zero-Doppler notch
    and, if snr_db gives the expected map SNR per (link, target) and CPI,
    that SNR reaches min_snr_db. Nodes are taken as stationary.
    """
    starts = np.asarray(cpi_starts_s, dtype=float)
    points: List[TruthPoint] = []
    if starts.size == 0:
        return points
    for target_id, records in group_by_target(gt).items():
        position, velocity = interpolate_ground_truth(records, starts + time_offset_s)
        for link, (tx, rx) in sorted(link_geometry.items()):
            delay, doppler = link_delay_doppler(tx, rx, position, velocity, carrier_hz)
            visible = np.abs(doppler) > notch_halfwidth_hz
            if snr_db is not None and (link, target_id) in snr_db:
                visible &= np.asarray(snr_db[(link, target_id)]) >= min_snr_db
            points.extend(TruthPoint(link, float(t), target_id, float(d), float(v), bool(ok))
                          for t, d, v, ok in zip(starts, delay, doppler, visible))
    return points


def _match_cell(detections: Sequence[Detection], truths: Sequence[TruthPoint],
                delay_gate_s: float, doppler_gate_hz: float) -> MatchResult:
    """Closest-first one-to-one matching inside one (CPI, link) cell."""
    candidates = []
    for i, det in enumerate(detections):
        for j, truth in enumerate(truths):
            dd = (det.delay_s - truth.delay_s) / delay_gate_s
            dv = (det.doppler_hz - truth.doppler_hz) / doppler_gate_hz
            if abs(dd) <= 1.0 and abs(dv) <= 1.0:
                candidates.append((dd * dd + dv * dv, det.delay_s, det.doppler_hz, j, i))
    candidates.sort()

    result = MatchResult()
    used_d, used_t = set(), set()
    for _, _, _, j, i in candidates:
        if i in used_d or j in used_t:
            continue
        used_d.add(i)
        used_t.add(j)
        result.matches.append(Match(detections[i], truths[j]))
    result.false_alarms = [d for i, d in enumerate(detections) if i not in used_d]
    result.misses = [t for j, t in enumerate(truths) if j not in used_t and t.visible]
    return result


def match_detections(detections: Sequence[Detection], truths: Sequence[TruthPoint],
                     delay_bin_s: float, doppler_bin_hz: float,
                     gate_bins: Tuple[float, float] = EvalDefaults.GATE_BINS) -> MatchResult:
    """
    Match detections to truth per CPI and link.

    A detection may match a truth within gate_bins (delay, Doppler) of it;
    pairs are taken closest first, each side at most once. Unmatched
    detections are false alarms; unmatched visible truths are misses.
    """
    delay_gate = gate_bins[0] * delay_bin_s
    doppler_gate = gate_bins[1] * doppler_bin_hz

    cells: Dict[Tuple[float, int], Tuple[List[Detection], List[TruthPoint]]] = {}
    for det in detections:
        cells.setdefault((det.cpi_start_s, det.link), ([], []))[0].append(det)
    for truth in truths:
        cells.setdefault((truth.cpi_start_s, truth.link), ([], []))[1].append(truth)

    result = MatchResult()
    for key in sorted(cells):
        dets, truths_here = cells[key]
        result.extend(_match_cell(dets, truths_here, delay_gate, doppler_gate))
    return result


def _ratio(numerator: int, denominator: int) -> Optional[float]:
    return numerator / denominator if denominator else None


def _rmse(errors: Sequence[float]) -> Optional[float]:
    if not len(errors):
        return None
    return float(np.sqrt(np.mean(np.square(errors))))


@dataclass
class LinkStats:
    matches: int = 0
    misses: int = 0
    false_alarms: int = 0

    @property
    def precision(self) -> Optional[float]:
        return _ratio(self.matches, self.matches + self.false_alarms)

    @property
    def recall(self) -> Optional[float]:
        return _ratio(self.matches, self.matches + self.misses)

    def to_dict(self) -> Dict[str, Any]:
        return {'matches': self.matches, 'misses': self.misses, 'false_alarms': self.false_alarms,
                'precision': self.precision, 'recall': self.recall}


@dataclass
class EvalReport:
    """
    Aggregated metrics.

    Ratios with a zero denominator and RMSEs over empty sets are None.
    """

    per_link: Dict[int, LinkStats] = field(default_factory=dict)
    delay_rmse_s: Optional[float] = None
    doppler_rmse_hz: Optional[float] = None
    position_rmse_m: Optional[float] = None
    false_alarms_per_map: Optional[float] = None
    false_alarm_rate_per_cell: Optional[float] = None
    confirmed_tracks: int = 0
    false_tracks: int = 0
    track_coverage: Optional[float] = None
    n_fixes: int = 0

    @property
    def totals(self) -> LinkStats:
        total = LinkStats()
        for stats in self.per_link.values():
            total.matches += stats.matches
            total.misses += stats.misses
            total.false_alarms += stats.false_alarms
        return total

    @property
    def precision(self) -> Optional[float]:
        return self.totals.precision

    @property
    def recall(self) -> Optional[float]:
        return self.totals.recall

    def to_dict(self) -> Dict[str, Any]:
        return {
            'precision': self.precision,
            'recall': self.recall,
            'per_link': {str(link): stats.to_dict() for link, stats in sorted(self.per_link.items())},
            'delay_rmse_s': self.delay_rmse_s,
            'doppler_rmse_hz': self.doppler_rmse_hz,
            'position_rmse_m': self.position_rmse_m,
            'false_alarms_per_map': self.false_alarms_per_map,
            'false_alarm_rate_per_cell': self.false_alarm_rate_per_cell,
            'confirmed_tracks': self.confirmed_tracks,
            'false_tracks': self.false_tracks,
            'track_coverage': self.track_coverage,
            'n_fixes': self.n_fixes,
        }

    def save(self, path: Union[str, Path]):
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2)

    def to_table(self) -> str:
        """Human-readable summary."""
        def fmt(value, unit="", scale=1.0, digits=3):
            return "n/a" if value is None else f"{value * scale:.{digits}f}{unit}"

        lines = ["📊 Evaluation report", "-" * 48,
                 f"{'link':>6} {'match':>7} {'miss':>6} {'false':>6} {'prec':>7} {'recall':>7}"]
        for link, stats in sorted(self.per_link.items()):
            lines.append(f"{link:>6} {stats.matches:>7} {stats.misses:>6} {stats.false_alarms:>6} "
                         f"{fmt(stats.precision):>7} {fmt(stats.recall):>7}")
        total = self.totals
        lines.append(f"{'all':>6} {total.matches:>7} {total.misses:>6} {total.false_alarms:>6} "
                     f"{fmt(total.precision):>7} {fmt(total.recall):>7}")
        lines += [
            "-" * 48,
            f"delay RMSE          {fmt(self.delay_rmse_s, ' ns', 1e9, 2)}",
            f"Doppler RMSE        {fmt(self.doppler_rmse_hz, ' Hz', 1.0, 2)}",
            f"position RMSE       {fmt(self.position_rmse_m, ' m', 1.0, 2)} ({self.n_fixes} fixes)",
            f"false alarms / map  {fmt(self.false_alarms_per_map)}",
            f"false alarms / cell {fmt(self.false_alarm_rate_per_cell, '', 1.0, 6)}",
            f"confirmed tracks    {self.confirmed_tracks} ({self.false_tracks} false)",
            f"track coverage      {fmt(self.track_coverage)}",
        ]
        return "\n".join(lines)


def _truth_near(truths: Sequence[TruthPoint], t_s: float, time_offset_s: float) -> List[TruthPoint]:
    """Truth points whose CPI time equals t_s up to rounding."""
    return [truth for truth in truths
            if abs(truth.cpi_start_s + time_offset_s - t_s) <= 1e-9 * max(1.0, abs(t_s))]


def _track_is_true(snaps: Sequence[TrackSnapshot], truth_by_link: Mapping[int, List[TruthPoint]],
                   delay_gate_s: float, doppler_gate_hz: float, time_offset_s: float) -> bool:
    """A track is true when most of its snapshots lie inside the gate of some truth."""
    inside = 0
    for snap in snaps:
        for truth in _truth_near(truth_by_link.get(snap.link, []), snap.t_s, time_offset_s):
            if (abs(snap.delay_s - truth.delay_s) <= delay_gate_s
                    and abs(snap.doppler_hz - truth.doppler_hz) <= doppler_gate_hz):
                inside += 1
                break
    return inside * 2 > len(snaps)


def summarize(result: MatchResult, fixes: Sequence[PositionFix] = (),
              gt: Sequence[GroundTruthRecord] = (), tracks: Sequence[TrackSnapshot] = (),
              truths: Sequence[TruthPoint] = (), n_links: Optional[int] = None, n_cpis: int = 0,
              cells_per_map: int = 0, delay_bin_s: float = 1.0, doppler_bin_hz: float = 1.0,
              gate_bins: Tuple[float, float] = EvalDefaults.GATE_BINS,
              time_offset_s: float = 0.0) -> EvalReport:
    """
    Aggregate matches, track snapshots and fixes into an EvalReport.

    n_cpis counts the maps processed per link (CPIs that produced no
    detection included). Track snapshot times are CPI start plus
    time_offset_s. Position errors are taken against ground truth of the
    first target, interpolated to the fix times.
    """
    report = EvalReport()
    links = set(range(n_links)) if n_links is not None else set()
    links |= {m.detection.link for m in result.matches}
    links |= {t.link for t in result.misses} | {d.link for d in result.false_alarms}
    report.per_link = {link: LinkStats() for link in sorted(links)}
    for m in result.matches:
        report.per_link[m.detection.link].matches += 1
    for t in result.misses:
        report.per_link[t.link].misses += 1
    for d in result.false_alarms:
        report.per_link[d.link].false_alarms += 1

    report.delay_rmse_s = _rmse([m.delay_error_s for m in result.matches])
    report.doppler_rmse_hz = _rmse([m.doppler_error_hz for m in result.matches])

    n_maps = n_cpis * len(report.per_link)
    n_false = len(result.false_alarms)
    report.false_alarms_per_map = n_false / n_maps if n_maps else None
    report.false_alarm_rate_per_cell = n_false / (n_maps * cells_per_map) if n_maps and cells_per_map else None

    if fixes and gt:
        first_target = next(iter(group_by_target(gt)))
        times = np.array([fix.t_s for fix in fixes])
        truth_pos, _ = interpolate_ground_truth(gt, times, first_target)
        errors = np.linalg.norm(np.array([fix.position for fix in fixes]) - truth_pos, axis=1)
        report.position_rmse_m = _rmse(errors)
    report.n_fixes = len(fixes)

    by_track: Dict[int, List[TrackSnapshot]] = {}
    for snap in tracks:
        by_track.setdefault(snap.track_id, []).append(snap)
    report.confirmed_tracks = len(by_track)
    if truths:
        truth_by_link: Dict[int, List[TruthPoint]] = {}
        for truth in truths:
            truth_by_link.setdefault(truth.link, []).append(truth)
        gates = (gate_bins[0] * delay_bin_s, gate_bins[1] * doppler_bin_hz)
        report.false_tracks = sum(
            not _track_is_true(snaps, truth_by_link, *gates, time_offset_s) for snaps in by_track.values())
    if n_maps:
        covered = {(snap.link, snap.t_s) for snap in tracks if snap.status == "confirmed"}
        report.track_coverage = len(covered) / n_maps

    LOGGER.info("evaluated %d matches, %d misses, %d false alarms",
                len(result.matches), len(result.misses), n_false)
    return report
