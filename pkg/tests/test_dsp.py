"""
Tests for the per-link detection chain.
"""

import numpy as np
import pytest
from scipy.signal.windows import hann

from src.channel.synthesis import synthesize_stream
from src.core.errors import ConfigurationError, SizeError
from src.core.geometry import link_truth
from src.core.scenario import ScenarioConfig
from src.core.streams import CfrStream
from src.dsp.cfar import CfarConfig, CfarHit, cfar_alpha, cfar_detect, cfar_threshold_map, cluster_hits
from src.dsp.maps import (
    BackgroundSubtractor, DelayDopplerMap, background_step, form_map, notch_columns, notch_zero_doppler
)
from src.dsp.peaks import parabolic_offset, refine_peak
from src.dsp.pipeline import DspConfig, LinkProcessor, detect_in_map, process_stream
from tests.benchmark.scenario_library import ScenarioLibrary

BANDWIDTH = 50e6
RATE = 1000.0


def point_cpi(delay_bins, doppler_bins, n_subcarriers=64, cpi_len=64, amplitude=1.0):
    """CPI of a single path at fractional (delay, Doppler) bins."""
    tau = delay_bins / BANDWIDTH
    nu = doppler_bins * RATE / cpi_len
    offsets = (np.arange(n_subcarriers) - n_subcarriers / 2) * BANDWIDTH / n_subcarriers
    t = np.arange(cpi_len) / RATE
    return amplitude * np.exp(2j * np.pi * nu * t)[:, None] * np.exp(-2j * np.pi * offsets * tau)[None, :]


class TestMapFormation:
    """Test delay-Doppler map formation."""

    def test_on_grid_peak(self):
        """A unit on-bin path peaks at magnitude 1 in its bin."""
        z = form_map(point_cpi(12, -5), BANDWIDTH, RATE)
        n, m = np.unravel_index(np.argmax(z.power), z.shape)
        assert (n, m) == (12, z.zero_doppler_index - 5)
        assert abs(z.data[n, m]) == pytest.approx(1.0)

    def test_axes(self):
        """Test bin sizes and axis origins."""
        z = form_map(point_cpi(0, 0, cpi_len=128), BANDWIDTH, RATE, link=2, cpi_start_s=0.5)
        assert z.shape == (64, 128)
        assert z.delay_bin_s == pytest.approx(20e-9)
        assert z.doppler_bin_hz == pytest.approx(RATE / 128)
        assert z.doppler_axis_hz[z.zero_doppler_index] == 0.0
        assert z.link == 2 and z.cpi_start_s == 0.5

    def test_ragged_cpi(self):
        """Test snapshots of different lengths."""
        with pytest.raises(SizeError):
            form_map([np.ones(8), np.ones(7)], BANDWIDTH, RATE)
        with pytest.raises(SizeError):
            form_map(np.ones((0, 8)), BANDWIDTH, RATE)

    def test_linear(self):
        """The map of a weighted sum is the weighted sum of the maps."""
        rng = np.random.default_rng(5)
        x = rng.standard_normal((32, 64)) + 1j * rng.standard_normal((32, 64))
        y = point_cpi(7.4, -3.2, cpi_len=32)
        a, b = 0.7 - 1.3j, -2.1 + 0.4j
        combined = form_map(a * x + b * y, BANDWIDTH, RATE).data
        separate = a * form_map(x, BANDWIDTH, RATE).data + b * form_map(y, BANDWIDTH, RATE).data
        assert np.max(np.abs(combined - separate)) <= 1e-12 * np.max(np.abs(combined))


class TestBackgroundAndNotch:
    """Test clutter suppression."""

    def test_static_residual_decays(self):
        """A static map is 40 dB down after 50 CPIs from an empty background."""
        z = form_map(point_cpi(20, 0) + point_cpi(5, 0, amplitude=3.0), BANDWIDTH, RATE)
        subtract = BackgroundSubtractor(beta=0.9, initial_state=np.zeros(z.shape, dtype=complex))
        for _ in range(50):
            residual = subtract(z)
        ratio_db = 10 * np.log10(residual.power.max() / z.power.max())
        assert ratio_db <= -40.0

    def test_first_map_initializes(self):
        """Without a prior state the first residual is empty."""
        z = form_map(point_cpi(7, 3), BANDWIDTH, RATE)
        assert np.allclose(BackgroundSubtractor()(z).data, 0.0)

    def test_step(self):
        """Test one exponential update."""
        z = DelayDopplerMap(0, 0.0, 1.0, 1.0, np.full((2, 2), 2.0 + 0j))
        state, residual = background_step(np.ones((2, 2)), z, beta=0.75)
        assert np.allclose(residual.data, 1.0)
        assert np.allclose(state, 1.25)
        with pytest.raises(SizeError):
            background_step(np.ones((3, 2)), z)

    def test_notch(self):
        """Columns within the half-width of zero Doppler are cleared."""
        assert notch_columns(8, 1).tolist() == [False, False, False, True, True, True, False, False]
        z = DelayDopplerMap(0, 0.0, 1.0, 1.0, np.ones((3, 8), dtype=complex))
        notched = notch_zero_doppler(z, 1)
        assert np.all(notched.data[:, 3:6] == 0)
        assert np.all(notched.data[:, [0, 1, 2, 6, 7]] == 1)
        assert np.all(z.data == 1)


class TestCfar:
    """Test cell-averaging CFAR."""

    def test_alpha(self):
        """Test the threshold multiplier for 16 cells."""
        assert cfar_alpha(16, 1e-3) == pytest.approx(8.639, abs=1e-3)

    def test_false_alarm_rate(self):
        """Exponential noise alarms at the design rate within a factor of 2."""
        rng = np.random.default_rng(0)
        power = rng.exponential(1.0, size=(1024, 1024))
        hits = cfar_detect(power, CfarConfig(pfa=1e-3))
        rate = len(hits) / power.size
        assert 0.5e-3 <= rate <= 2e-3

    def test_detects_strong_cell(self):
        """A 30 dB cell on a flat floor is detected with the right noise mean."""
        power = np.ones((40, 40))
        power[20, 15] = 1000.0
        hits = cfar_detect(power)
        assert [(h.delay_idx, h.doppler_idx) for h in hits] == [(20, 15)]
        assert hits[0].noise_mean == pytest.approx(1.0)

    def test_masked_cells_skipped(self):
        """Masked cells neither train nor get tested."""
        power = np.ones((20, 20))
        power[10, 10] = 1000.0
        mask = np.ones_like(power, dtype=bool)
        mask[:, 10] = False
        threshold, noise = cfar_threshold_map(power, CfarConfig(), mask)
        assert np.all(np.isinf(threshold[:, 10]))
        assert cfar_detect(power, CfarConfig(), mask) == []

    def test_invalid_config(self):
        """Test pfa bounds and a ring that is too small."""
        with pytest.raises(ConfigurationError):
            CfarConfig(pfa=0.7)
        with pytest.raises(ConfigurationError):
            CfarConfig(guard=(0, 0), train=(0, 0))

    def test_clustering(self):
        """Adjacent hits merge into their strongest cell."""
        hits = [CfarHit(5, 5, 10.0, 1.0, 0.1), CfarHit(5, 6, 30.0, 1.0, 0.1),
                CfarHit(6, 7, 20.0, 1.0, 0.1), CfarHit(1, 1, 5.0, 1.0, 0.1)]
        peaks = cluster_hits(hits, (10, 10))
        assert [(p.delay_idx, p.doppler_idx) for p in peaks] == [(1, 1), (5, 6)]
        assert cluster_hits([]) == []


class TestPeakRefinement:
    """Test parabolic off-grid refinement."""

    def test_parabolic_offset(self):
        """Test symmetric, skewed and flat triples."""
        assert parabolic_offset(1.0, 2.0, 1.0) == 0.0
        assert parabolic_offset(1.0, 3.0, 2.0) == pytest.approx(1 / 6)
        assert parabolic_offset(1.0, 1.0, 1.0) == 0.0

    def test_off_grid_path(self):
        """A path at 10.3 bins on both axes is refined to within 0.05 bin."""
        z = form_map(point_cpi(10.3, 10.3), BANDWIDTH, RATE)
        n, m = np.unravel_index(np.argmax(z.power), z.shape)
        assert (n, m) == (10, z.zero_doppler_index + 10)
        detection = refine_peak(z, CfarHit(int(n), int(m), float(z.power[n, m]), 0.0, 1e-6))
        assert abs(detection.delay_s * BANDWIDTH - 10.3) < 0.05
        assert abs(detection.doppler_hz / z.doppler_bin_hz - 10.3) < 0.05
        assert detection.delay_refined and detection.doppler_refined
        assert detection.snr_db > 50

    def test_noisy_off_grid_path(self):
        """At 30 dB map SNR the refined delay stays within 0.05 bin of truth and of a 64x zero-padded peak."""
        k, m, pad, truth = 64, 64, 64, 10.3
        # Noise per CFR sample that puts an on-grid unit path 30 dB over the map noise floor
        sigma = np.sqrt(1e-3 * k * m / 2.25)
        w_doppler = hann(m, sym=False)
        w_delay = hann(k, sym=False)
        refined, oracle = [], []
        for seed in range(50):
            rng = np.random.default_rng(seed)
            cpi = point_cpi(truth, 10.3, n_subcarriers=k, cpi_len=m)
            cpi = cpi + sigma / np.sqrt(2) * (rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k)))
            z = form_map(cpi, BANDWIDTH, RATE)
            n, col = np.unravel_index(np.argmax(z.power), z.shape)
            detection = refine_peak(z, CfarHit(int(n), int(col), float(z.power[n, col]), 0.0, 1e-3))
            refined.append(detection.delay_s * BANDWIDTH)

            column = np.fft.fftshift(np.fft.fft(cpi * w_doppler[:, None], axis=0), axes=0)[col]
            spectrum = np.fft.ifftshift(column * w_delay)
            padded = np.zeros(pad * k, dtype=complex)
            padded[:k // 2] = spectrum[:k // 2]
            padded[-(k // 2):] = spectrum[k // 2:]
            oracle.append(np.argmax(np.abs(np.fft.ifft(padded))) / pad)
        refined, oracle = np.array(refined), np.array(oracle)
        assert np.sqrt(np.mean((refined - truth) ** 2)) < 0.05
        assert np.sqrt(np.mean((refined - oracle) ** 2)) < 0.05

    def test_edge_peak_not_refined(self):
        """A peak on the first delay bin keeps its on-grid delay."""
        z = form_map(point_cpi(0, 4), BANDWIDTH, RATE)
        m = z.zero_doppler_index + 4
        detection = refine_peak(z, CfarHit(0, m, float(z.power[0, m]), 0.0, 1e-6))
        assert detection.delay_s == 0.0
        assert not detection.delay_refined
        assert detection.doppler_refined


class TestPipeline:
    """Test stream processing end to end."""

    @pytest.fixture(scope="class")
    def scene(self):
        return ScenarioConfig.from_dict(ScenarioLibrary.single_target(duration_s=0.5))

    @pytest.fixture(scope="class")
    def stream(self, scene):
        return synthesize_stream(scene, threads=2)

    def test_config_from_dict(self):
        """Test defaults, overrides and errors with JSON paths."""
        config = DspConfig.from_dict(ScenarioLibrary.dsp_config())
        assert config.cpi_len == 128 and config.cfar.train == (4, 4)
        assert DspConfig.from_dict({}).to_dict() == DspConfig().to_dict()
        with pytest.raises(ConfigurationError) as info:
            DspConfig.from_dict({'window': 'hamming'})
        assert info.value.path == "$.window"
        with pytest.raises(ConfigurationError) as info:
            DspConfig.from_dict({'cpi_len': 4})
        assert info.value.path == "$.cpi_len"

    def test_cpi_center_offset(self):
        """Test the snapshot time of a CPI center."""
        assert DspConfig(cpi_len=128).cpi_center_offset_s(1000.0) == pytest.approx(0.0635)

    def test_empty_stream(self):
        """No snapshots give no detections."""
        stream = CfrStream(np.zeros((0, 2, 64), dtype=np.complex64), RATE, [("a", "b"), ("a", "c")],
                           3e9, BANDWIDTH)
        assert process_stream(stream) == []

    def test_single_cpi_only_seeds_background(self):
        """The first CPI of a link yields no detections."""
        data = point_cpi(10, 6)[:, None, :].astype(np.complex64)
        stream = CfrStream(data, RATE, [("a", "b")], 3e9, BANDWIDTH)
        assert process_stream(stream, DspConfig(cpi_len=64)) == []

    def test_detects_target(self, scene, stream):
        """Every processed CPI holds a detection within a bin of the truth."""
        config = DspConfig(cpi_len=64)
        detections = process_stream(stream, config, threads=2)
        offset = config.cpi_center_offset_s(RATE)
        delay_bin, doppler_bin = 1 / BANDWIDTH, RATE / 64

        for link_index, link in enumerate(scene.links):
            processor = LinkProcessor(stream, link_index, config)
            for cpi in range(1, processor.n_cpis):
                start = processor.cpi_start_s(cpi)
                tau, nu = link_truth(scene, link, scene.targets[0], start + offset)
                near = [d for d in detections
                        if d.link == link_index and d.cpi_start_s == pytest.approx(start)
                        and abs(d.delay_s - tau) <= delay_bin and abs(d.doppler_hz - nu) <= doppler_bin]
                assert near, f"no detection near the target on link {link_index} at {start:.3f} s"

    def test_thread_count_invariant(self, stream):
        """Detections do not depend on the worker count."""
        config = DspConfig(cpi_len=64)
        assert process_stream(stream, config, threads=1) == process_stream(stream, config, threads=3)

    def test_sorted_output(self, stream):
        """Detections come ordered by CPI start, then link."""
        detections = process_stream(stream, DspConfig(cpi_len=64), threads=2)
        keys = [(d.cpi_start_s, d.link) for d in detections]
        assert keys == sorted(keys)

    def test_map_sink(self, stream):
        """The sink sees every exported CPI of every link."""
        seen = []
        process_stream(stream, DspConfig(cpi_len=64, export_every=2), threads=1,
                       map_sink=lambda z, residual: seen.append((z.link, z.cpi_start_s)))
        n_cpis = stream.n_snapshots // 64
        assert len(seen) == stream.n_links * len(range(0, n_cpis, 2))

    def test_detect_in_map_respects_notch(self):
        """A path at zero Doppler is never reported."""
        z = form_map(point_cpi(10, 0, amplitude=100.0) + 0.01 * np.random.default_rng(1).standard_normal((64, 64)),
                     BANDWIDTH, RATE)
        detections = detect_in_map(z, DspConfig(cpi_len=64))
        assert all(abs(d.doppler_hz) > z.doppler_bin_hz for d in detections)


if __name__ == "__main__":
    pytest.main([__file__])
