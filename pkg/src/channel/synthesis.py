"""
Geometry-driven channel synthesis.

Every link response is a sum of discrete paths (direct path, target echo,
rotor tips, static clutter) evaluated in the frequency domain:

    H_l(k, t) = sum_p a_p * exp(-j 2 pi (f_c + f_k) tau_p(t)) + n_k

with f_k = (k - K/2) * B / K. Doppler is not injected; it follows from the
time variation of tau_p(t) through the carrier term.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal.windows import hann

from config.isac_config import SPEED_OF_LIGHT, ChannelConfig
from ..core.errors import ConfigurationError, GeometryError
from ..core.geometry import (COINCIDENT_TOL_M, bistatic_angle, draw_clutter,
                             position_at, velocity_at)
from ..core.scenario import LinkSpec, ScenarioConfig
from ..core.streams import CfrSnapshot, CfrStream
from ..signature.reflectivity import ReflectivityTable, reflectivity_lookup
from ..signature.rotor import rotor_tip_positions
from ..utils.runtime import parallel_map, timeit
from ..utils.validation import check_scenario_warnings

LOGGER = logging.getLogger(__name__)

PATH_KINDS = ("los", "target", "rotor", "clutter")
ALL_KINDS = frozenset(PATH_KINDS)
FOUR_PI_CUBED_SQRT = (4.0 * np.pi) ** 1.5


@dataclass(frozen=True)
class PathComponent:
    """One discrete propagation path on a link."""

    delay_s: float
    amplitude: complex
    kind: str
    source: str = ""

    def __post_init__(self):
        if self.kind not in PATH_KINDS:
            raise ConfigurationError(f"path kind must be one of {PATH_KINDS}")
        if self.delay_s < 0 or not np.isfinite(self.amplitude):
            raise GeometryError(f"invalid {self.kind} path: delay {self.delay_s}, amplitude {self.amplitude}")


def _distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.linalg.norm(a - b, axis=-1)
    if np.any(d < COINCIDENT_TOL_M):
        raise GeometryError("scatterer coincides with a node; path amplitude undefined")
    return d


class ChannelSynthesizer:
    """
    Per-scenario path model with cached static responses.

    Clutter is drawn once from the clutter seed. When both nodes of a link
    are stationary, the direct path and clutter sum is computed once.
    """

    def __init__(self, scenario: ScenarioConfig):
        self.scenario = scenario
        self.clutter_positions, self.clutter_gains = draw_clutter(scenario.clutter)
        k = np.arange(scenario.n_subcarriers)
        self.subcarrier_offsets_hz = (k - scenario.n_subcarriers / 2) * scenario.bandwidth_hz / scenario.n_subcarriers
        self.frequencies_hz = scenario.carrier_hz + self.subcarrier_offsets_hz
        self._static_cache: Dict[Tuple[int, FrozenSet[str]], np.ndarray] = {}

    def _link_nodes(self, link: LinkSpec):
        return self.scenario.node(link.tx_id), self.scenario.node(link.rx_id)

    def _scale(self, link: LinkSpec) -> float:
        tx, rx = self._link_nodes(link)
        return float(np.sqrt(tx.tx_power_w * tx.antenna_gain_linear * rx.antenna_gain_linear))

    def _echo_amplitude(self, scale, gain, r_tx, r_rx):
        return scale * self.scenario.wavelength_m * gain / (FOUR_PI_CUBED_SQRT * r_tx * r_rx)

    def path_arrays(self, link: LinkSpec, t, kinds: FrozenSet[str] = ALL_KINDS
                    ) -> Tuple[np.ndarray, np.ndarray, List[Tuple[str, str]]]:
        """
        Vectorized path parameters for times t.

        Returns delays (T, P), amplitudes (T, P) and one (kind, source) label
        per path column.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tx, rx = self._link_nodes(link)
        tx_pos = position_at(tx.trajectory, t)
        rx_pos = position_at(rx.trajectory, t)
        scale = self._scale(link)

        delays, amps, labels = [], [], []

        if "los" in kinds and not link.is_monostatic:
            d = _distance(tx_pos, rx_pos)
            delays.append((d / SPEED_OF_LIGHT)[:, None])
            amps.append((scale * self.scenario.wavelength_m / (4.0 * np.pi * d))[:, None].astype(complex))
            labels.append(("los", f"{link.tx_id}->{link.rx_id}"))

        for target in self.scenario.targets:
            p = position_at(target.trajectory, t)
            if "target" in kinds:
                r_tx, r_rx = _distance(p, tx_pos), _distance(p, rx_pos)
                signature = self.scenario.signature(target.signature_id)
                if isinstance(signature, ReflectivityTable):
                    gain = reflectivity_lookup(signature, self.scenario.carrier_hz,
                                               bistatic_angle(tx_pos, rx_pos, p))
                else:
                    gain = complex(signature)
                delays.append(((r_tx + r_rx) / SPEED_OF_LIGHT)[:, None])
                amps.append(np.asarray(self._echo_amplitude(scale, gain, r_tx, r_rx), dtype=complex)[:, None])
                labels.append(("target", target.id))
            if "rotor" in kinds and target.rotor is not None:
                tips = rotor_tip_positions(target.rotor, p, t)
                r_tx = _distance(tips, tx_pos[:, None, :])
                r_rx = _distance(tips, rx_pos[:, None, :])
                delays.append((r_tx + r_rx) / SPEED_OF_LIGHT)
                amps.append(self._echo_amplitude(scale, complex(target.rotor.tip_amplitude), r_tx, r_rx))
                labels.extend(("rotor", f"{target.id}.blade{j}") for j in range(target.rotor.n_blades))

        if "clutter" in kinds and len(self.clutter_positions):
            c = self.clutter_positions[None, :, :]
            r_tx = _distance(c, tx_pos[:, None, :])
            r_rx = _distance(c, rx_pos[:, None, :])
            delays.append((r_tx + r_rx) / SPEED_OF_LIGHT)
            amps.append(self._echo_amplitude(scale, self.clutter_gains[None, :], r_tx, r_rx))
            labels.extend(("clutter", f"cluster{j}") for j in range(len(self.clutter_positions)))

        if not delays:
            return np.zeros((t.size, 0)), np.zeros((t.size, 0), dtype=complex), []
        return np.hstack(delays), np.hstack(amps).astype(complex), labels

    def paths_at(self, link: LinkSpec, t: float) -> List[PathComponent]:
        """All path components of one link at time t."""
        delays, amps, labels = self.path_arrays(link, t)
        return [PathComponent(float(delays[0, j]), complex(amps[0, j]), kind, source)
                for j, (kind, source) in enumerate(labels)]

    def _sum_paths(self, delays: np.ndarray, amps: np.ndarray) -> np.ndarray:
        response = np.zeros((delays.shape[0], self.frequencies_hz.size), dtype=complex)
        for j in range(delays.shape[1]):
            response += amps[:, j, None] * np.exp(-2j * np.pi * self.frequencies_hz[None, :] * delays[:, j, None])
        return response

    def _is_static_link(self, link: LinkSpec) -> bool:
        tx, rx = self._link_nodes(link)
        return tx.trajectory.is_stationary and rx.trajectory.is_stationary

    def noise(self, snapshot_index: int, link_index: int) -> np.ndarray:
        """Circular complex Gaussian noise seeded by (rng_seed, snapshot, link)."""
        rng = np.random.default_rng([self.scenario.rng_seed, int(snapshot_index), int(link_index)])
        sigma = np.sqrt(self.scenario.noise_power_w / 2.0)
        return sigma * (rng.standard_normal(self.frequencies_hz.size)
                        + 1j * rng.standard_normal(self.frequencies_hz.size))

    def link_response(self, link_index: int, t, kinds: FrozenSet[str] = ALL_KINDS,
                      snapshot_indices: Optional[Sequence[int]] = None) -> np.ndarray:
        """
        Responses of one link at times t, shape (T, K).

        Noise is added for every entry of snapshot_indices; pass None for a
        noise-free response.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        link = self.scenario.links[link_index]
        kinds = frozenset(kinds)

        static_kinds = kinds & {"los", "clutter"} if self._is_static_link(link) else frozenset()
        dynamic_kinds = kinds - static_kinds

        delays, amps, _ = self.path_arrays(link, t, dynamic_kinds)
        response = self._sum_paths(delays, amps)

        if static_kinds:
            key = (link_index, static_kinds)
            if key not in self._static_cache:
                s_delays, s_amps, _ = self.path_arrays(link, t[:1], static_kinds)
                self._static_cache[key] = self._sum_paths(s_delays, s_amps)[0]
            response += self._static_cache[key][None, :]

        if snapshot_indices is not None:
            for row, index in enumerate(snapshot_indices):
                response[row] += self.noise(index, link_index)
        return response


@lru_cache(maxsize=8)
def get_synthesizer(scenario: ScenarioConfig) -> ChannelSynthesizer:
    """Shared synthesizer per scenario object."""
    return ChannelSynthesizer(scenario)


def paths_at(scenario: ScenarioConfig, link: LinkSpec, t: float) -> List[PathComponent]:
    """Discrete path components of a link at time t."""
    return get_synthesizer(scenario).paths_at(link, t)


def synthesize_snapshot(scenario: ScenarioConfig, t: float, snapshot_index: Optional[int] = None,
                        with_noise: bool = True, kinds=ALL_KINDS) -> CfrSnapshot:
    """
    Complex128 responses of every link at time t.

    The noise seed uses snapshot_index, which defaults to round(t * rate).
    """
    synth = get_synthesizer(scenario)
    if snapshot_index is None:
        snapshot_index = int(round(t * scenario.snapshot_rate_hz))
    indices = [snapshot_index] if with_noise else None
    responses = np.vstack([synth.link_response(l, t, kinds, indices)
                           for l in range(len(scenario.links))])
    return CfrSnapshot(t_s=float(t), index=snapshot_index, responses=responses)


@timeit
def synthesize_stream(scenario: ScenarioConfig, start: int = 0, stop: Optional[int] = None,
                      threads: Optional[int] = None, with_noise: bool = True,
                      progress: bool = False) -> CfrStream:
    """
    Synthesize snapshots [start, stop) of the scenario as a complex64 stream.

    Blocks are aligned to absolute snapshot indices and computed in
    parallel; the result does not depend on the thread count or on where
    the stream starts.
    """
    check_scenario_warnings(scenario)
    n_total = scenario.n_snapshots
    stop = n_total if stop is None else min(int(stop), n_total)
    start = max(0, int(start))
    if stop < start:
        raise ConfigurationError(f"stream stop {stop} precedes start {start}")

    synth = get_synthesizer(scenario)
    n_links = len(scenario.links)
    data = np.zeros((stop - start, n_links, scenario.n_subcarriers), dtype=np.complex64)

    block = ChannelConfig.BLOCK_SIZE
    edges = sorted({start, stop} | set(range((start // block + 1) * block, stop, block)))
    spans = [(a, b) for a, b in zip(edges[:-1], edges[1:])]

    def work(span):
        a, b = span
        indices = np.arange(a, b)
        t = indices / scenario.snapshot_rate_hz
        for l in range(n_links):
            response = synth.link_response(l, t, ALL_KINDS, indices if with_noise else None)
            data[a - start:b - start, l, :] = response.astype(np.complex64)
        return b - a

    parallel_map(work, spans, threads=threads, progress=progress, desc="synth")
    LOGGER.info("synthesized %d snapshots x %d links x %d subcarriers",
                stop - start, n_links, scenario.n_subcarriers)
    return CfrStream(data, scenario.snapshot_rate_hz,
                     [(link.tx_id, link.rx_id) for link in scenario.links],
                     scenario.carrier_hz, scenario.bandwidth_hz, first_index=start, scenario=scenario)


def _noise_enhancement(n: int) -> float:
    w = hann(n, sym=False)
    return float(np.sum(w ** 2) / np.sum(w) ** 2)


def expected_map_snr_db(scenario: ScenarioConfig, link_index: int, t: float, cpi_len: int,
                        target_index: int = 0) -> float:
    """
    Target peak SNR on a delay-Doppler map formed from cpi_len snapshots.

    Uses the Hann-windowed coherent gain of both transforms; straddle loss
    is ignored.
    """
    synth = get_synthesizer(scenario)
    link = scenario.links[link_index]
    target = scenario.targets[target_index]
    _, amps, labels = synth.path_arrays(link, t, frozenset({"target"}))
    column = [j for j, (_, source) in enumerate(labels) if source == target.id][0]
    signal_power = float(np.abs(amps[0, column]) ** 2)
    noise_power = (scenario.noise_power_w * _noise_enhancement(scenario.n_subcarriers)
                   * _noise_enhancement(cpi_len))
    return 10.0 * np.log10(signal_power / noise_power)


def stream_velocity_bound(scenario: ScenarioConfig, n_samples: int = 201) -> float:
    """Largest target speed along any trajectory, m/s."""
    speeds = [0.0]
    for target in scenario.targets:
        traj = target.trajectory
        if traj.is_stationary:
            continue
        t = np.linspace(traj.times[0], traj.times[-1], n_samples)
        speeds.append(float(np.max(np.linalg.norm(velocity_at(traj, t), axis=-1))))
    return max(speeds)
