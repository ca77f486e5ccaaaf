"""
Tests for target signatures: reflectivity tables, rotor model and
micro-Doppler analysis.
"""

import json
import logging

import numpy as np
import pytest

from config.isac_config import SPEED_OF_LIGHT
from src.core.errors import (
    ConfigurationError, InsufficientDataError, InsufficientPeriodicityError,
    PayloadLengthError, SizeError
)
from src.signature.reflectivity import (
    ReflectivityTable, read_reflectivity_table, reflectivity_lookup, write_reflectivity_table
)
from src.signature.rotor import RotorSpec, rotor_scatterers, rotor_tip_positions
from src.signature.spectrogram import Spectrogram, dominant_period, flash_rate, occupancy, spectrogram

FC = 3e9
RATE_HZ = 10_000.0
WINDOW = 64
HOP = 4


def rotor_echo(n_blades, duration_s=0.2, sigma=0.03, seed=0):
    """Slow-time echo of a rotor 30 m in front of a mono-static radar."""
    rotor = RotorSpec(n_blades=n_blades, blade_radius_m=0.2, rotation_hz=50.0)
    t = np.arange(int(duration_s * RATE_HZ)) / RATE_HZ
    hub = np.broadcast_to([30.0, 0.0, 0.0], (t.size, 3))
    tips = rotor_tip_positions(rotor, hub, t)
    ranges = 2.0 * np.linalg.norm(tips, axis=-1)
    series = np.exp(-2j * np.pi * FC * ranges / SPEED_OF_LIGHT).sum(axis=1)
    rng = np.random.default_rng(seed)
    noise = sigma * (rng.standard_normal(t.size) + 1j * rng.standard_normal(t.size))
    return series + noise


@pytest.fixture
def table():
    """3 x 3 table with exactly representable gains."""
    gains = np.array([[1.0, 0.5, 0.25],
                      [0.5 + 0.5j, 0.25j, -0.5],
                      [2.0, 1.0, 0.0]])
    return ReflectivityTable(freq_grid_hz=np.array([2.9e9, 3.0e9, 3.1e9]),
                             angle_grid_deg=np.array([0.0, 90.0, 180.0]),
                             gains=gains, polarization_tag="HH")


class TestReflectivityTable:
    """Test table lookup and file format."""

    def test_lookup_on_grid(self, table):
        """Grid nodes return the stored gain."""
        assert reflectivity_lookup(table, 3.0e9, 90.0) == pytest.approx(0.25j)
        assert table.gain(2.9e9, 0.0) == pytest.approx(1.0)

    def test_bilinear_midpoint(self, table):
        """The cell center is the mean of its four corners."""
        value = reflectivity_lookup(table, 2.95e9, 45.0)
        expected = (1.0 + 0.5 + (0.5 + 0.5j) + 0.25j) / 4
        assert value == pytest.approx(expected)

    def test_vectorized(self, table):
        """Array queries return arrays of the broadcast shape."""
        values = reflectivity_lookup(table, np.array([2.9e9, 3.1e9]), 0.0)
        assert values.shape == (2,)
        assert np.allclose(values, [1.0, 2.0])

    def test_clamps_outside_grid(self, table, caplog):
        """Out-of-grid queries take the edge value and warn once."""
        with caplog.at_level(logging.WARNING):
            low = reflectivity_lookup(table, 1e9, 0.0)
            high = reflectivity_lookup(table, 9e9, 180.0)
            reflectivity_lookup(table, 9e9, 90.0)
        assert low == pytest.approx(1.0)
        assert high == pytest.approx(0.0)
        assert sum("clamping" in r.message for r in caplog.records) <= 1

    def test_rejects_bad_grid(self):
        """Test validation of grids and shapes."""
        with pytest.raises(ConfigurationError):
            ReflectivityTable(np.array([3e9, 2e9]), np.array([0.0, 90.0]), np.ones((2, 2)))
        with pytest.raises(ConfigurationError):
            ReflectivityTable(np.array([2e9, 3e9]), np.array([0.0, 200.0]), np.ones((2, 2)))
        with pytest.raises(ConfigurationError):
            ReflectivityTable(np.array([2e9, 3e9]), np.array([0.0, 90.0]), np.ones((3, 2)))

    def test_file_round_trip(self, table, tmp_path):
        """Header and payload reload to the same table."""
        payload = write_reflectivity_table(table, tmp_path / "uav.json")
        assert payload.exists()
        loaded = read_reflectivity_table(tmp_path / "uav.json")
        assert np.array_equal(loaded.gains, table.gains)
        assert np.array_equal(loaded.freq_grid_hz, table.freq_grid_hz)
        assert loaded.polarization_tag == "HH"

    def test_truncated_payload(self, table, tmp_path):
        """A short payload reports expected and actual sizes."""
        payload = write_reflectivity_table(table, tmp_path / "uav.json")
        data = payload.read_bytes()
        payload.write_bytes(data[:-8])
        with pytest.raises(PayloadLengthError) as info:
            read_reflectivity_table(tmp_path / "uav.json")
        assert info.value.expected == len(data)
        assert info.value.actual == len(data) - 8

    def test_wrong_version(self, table, tmp_path):
        """Test rejection of an unknown format version."""
        write_reflectivity_table(table, tmp_path / "uav.json")
        header = json.loads((tmp_path / "uav.json").read_text())
        header['format_version'] = 99
        (tmp_path / "uav.json").write_text(json.dumps(header))
        with pytest.raises(ConfigurationError):
            read_reflectivity_table(tmp_path / "uav.json")

    def test_continuous_across_grid_lines(self, table):
        """Lookups on both sides of a grid line converge to the value on it."""
        eps = 1e-6
        for beta in (20.0, 90.0, 135.0):
            on = reflectivity_lookup(table, 3.0e9, beta)
            below = reflectivity_lookup(table, 3.0e9 - eps * 1e8, beta)
            above = reflectivity_lookup(table, 3.0e9 + eps * 1e8, beta)
            assert abs(below - on) < 10 * eps and abs(above - on) < 10 * eps
        for f in (2.93e9, 3.0e9, 3.07e9):
            on = reflectivity_lookup(table, f, 90.0)
            below = reflectivity_lookup(table, f, 90.0 - eps * 90.0)
            above = reflectivity_lookup(table, f, 90.0 + eps * 90.0)
            assert abs(below - on) < 10 * eps and abs(above - on) < 10 * eps


class TestRotor:
    """Test blade tip kinematics."""

    @pytest.fixture
    def rotor(self):
        return RotorSpec(n_blades=3, blade_radius_m=0.5, rotation_hz=20.0)

    def test_tip_geometry(self, rotor):
        """Tips lie on the rotor circle in the rotation plane."""
        t = np.linspace(0.0, 0.1, 11)
        hub = np.broadcast_to([1.0, 2.0, 3.0], (t.size, 3))
        tips = rotor_tip_positions(rotor, hub, t)
        assert tips.shape == (11, 3, 3)
        arms = tips - hub[:, None, :]
        assert np.allclose(np.linalg.norm(arms, axis=-1), 0.5)
        assert np.allclose(arms[..., 2], 0.0)

    def test_blade_spacing(self, rotor):
        """Adjacent blades are 120 degrees apart."""
        tips = rotor_tip_positions(rotor, np.zeros(3), 0.0)
        cosines = [tips[i] @ tips[(i + 1) % 3] / 0.25 for i in range(3)]
        assert np.allclose(cosines, np.cos(2 * np.pi / 3))

    def test_periodic(self, rotor):
        """Tip positions repeat after one rotation."""
        a = rotor_tip_positions(rotor, np.zeros(3), 0.013)
        b = rotor_tip_positions(rotor, np.zeros(3), 0.013 + 1 / 20.0)
        assert np.allclose(a, b)

    def test_scatterers(self, rotor):
        """One scatterer per blade with the tip amplitude."""
        scatterers = rotor_scatterers(rotor, [0.0, 0.0, 10.0], 0.0)
        assert len(scatterers) == 3
        assert all(gain == 1.0 for _, gain in scatterers)

    def test_invalid(self):
        """Test rotor parameter validation."""
        with pytest.raises(ConfigurationError):
            RotorSpec(n_blades=0, blade_radius_m=0.2, rotation_hz=10.0)
        with pytest.raises(ConfigurationError):
            RotorSpec(n_blades=2, blade_radius_m=-1.0, rotation_hz=10.0)
        with pytest.raises(ConfigurationError):
            RotorSpec(n_blades=2, blade_radius_m=0.2, rotation_hz=10.0, plane_normal=(0.0, 0.0, 2.0))

    def test_peak_tip_doppler(self):
        """A 0.2 m blade at 50 Hz seen edge-on from 30 m peaks near 1257 Hz at 3 GHz."""
        rotor = RotorSpec(n_blades=2, blade_radius_m=0.2, rotation_hz=50.0)
        t = np.arange(2001) / 100_000.0
        hub = np.broadcast_to([30.0, 0.0, 0.0], (t.size, 3))
        delays = 2.0 * np.linalg.norm(rotor_tip_positions(rotor, hub, t), axis=-1) / SPEED_OF_LIGHT
        doppler = -FC * np.gradient(delays, t, axis=0)
        tip_doppler = 2 * (2 * np.pi * 50.0 * 0.2) * FC / SPEED_OF_LIGHT
        assert np.max(np.abs(doppler)) == pytest.approx(tip_doppler, rel=1e-3)
        assert np.max(np.abs(doppler)) == pytest.approx(1257.0, abs=2.0)
        assert np.max(doppler[:, 0]) == pytest.approx(-np.min(doppler[:, 0]), rel=1e-3)


class TestSpectrogram:
    """Test STFT analysis and blade-flash estimation."""

    def test_axes_and_shape(self):
        """Test column count and axis spacing."""
        spec = spectrogram(np.ones(1000, dtype=complex), RATE_HZ, WINDOW, HOP)
        assert spec.power.shape == ((1000 - WINDOW) // HOP + 1, WINDOW)
        assert spec.hop_s == pytest.approx(HOP / RATE_HZ)
        assert spec.doppler_axis[1] - spec.doppler_axis[0] == pytest.approx(RATE_HZ / WINDOW)
        assert spec.doppler_axis[WINDOW // 2] == 0.0

    def test_column_energy(self):
        """Each column sums to the energy of its windowed segment."""
        rng = np.random.default_rng(3)
        x = rng.standard_normal(256) + 1j * rng.standard_normal(256)
        spec = spectrogram(x, RATE_HZ, WINDOW, WINDOW)
        window = np.hanning(WINDOW + 1)[:-1]
        assert spec.power[0].sum() == pytest.approx(np.sum(np.abs(x[:WINDOW] * window) ** 2))

    def test_tone_peak(self):
        """A tone at 1250 Hz peaks in the 1250 Hz bin."""
        t = np.arange(2000) / RATE_HZ
        spec = spectrogram(np.exp(2j * np.pi * 1250.0 * t), RATE_HZ, WINDOW, HOP)
        assert np.allclose(spec.peak_trace(), 1250.0)

    def test_too_short(self):
        """Test series shorter than the window."""
        with pytest.raises(SizeError):
            spectrogram(np.ones(10), RATE_HZ, WINDOW, HOP)
        with pytest.raises(SizeError):
            spectrogram(np.ones(100), RATE_HZ, WINDOW, 0)

    def test_two_blade_flash_rate(self):
        """Two blades at 50 Hz flash at 100 Hz."""
        spec = spectrogram(rotor_echo(2), RATE_HZ, WINDOW, HOP)
        assert flash_rate(spec) == pytest.approx(100.0, rel=0.03)

    def test_one_blade_trace_period(self):
        """The peak Doppler trace of one blade repeats every rotation."""
        spec = spectrogram(rotor_echo(1), RATE_HZ, WINDOW, HOP)
        trace = spec.peak_trace()
        assert dominant_period(trace, spec.hop_s) == pytest.approx(0.02, rel=0.03)

        tip_doppler = 2 * (2 * np.pi * 50.0 * 0.2) * FC / SPEED_OF_LIGHT
        bin_hz = RATE_HZ / WINDOW
        assert abs(np.max(np.abs(trace)) - tip_doppler) <= 2 * bin_hz

    def test_occupancy_is_one_sided(self):
        """Only bins at or above zero Doppler count."""
        time_axis = np.arange(10) * 1e-3
        doppler_axis = np.fft.fftshift(np.fft.fftfreq(WINDOW, d=1.0 / RATE_HZ))
        power = np.ones((10, WINDOW))
        power[:, 5] = 1e3
        negative = Spectrogram(time_axis, doppler_axis, power)
        assert np.all(occupancy(negative) == 0)

        power = power.copy()
        power[:, WINDOW // 2 + 8] = 1e3
        positive = Spectrogram(time_axis, doppler_axis, power)
        assert np.all(occupancy(positive) == 9)

    def test_occupancy_count(self):
        """Count mode counts occupied bins on both sides of zero Doppler."""
        time_axis = np.arange(10) * 1e-3
        doppler_axis = np.fft.fftshift(np.fft.fftfreq(WINDOW, d=1.0 / RATE_HZ))
        power = np.ones((10, WINDOW))
        power[:, [5, 6, WINDOW // 2 + 8]] = 1e3
        power[3, WINDOW // 2] = 1e3
        spec = Spectrogram(time_axis, doppler_axis, power)
        counts = occupancy(spec, mode="count")
        assert counts[3] == 4
        assert np.all(np.delete(counts, 3) == 3)
        assert occupancy(spec, threshold_db=40.0, mode="count").sum() == 0
        with pytest.raises(ConfigurationError):
            occupancy(spec, mode="width")

    def test_static_target_not_periodic(self):
        """A constant trace has no periodic structure."""
        t = np.arange(2000) / RATE_HZ
        spec = spectrogram(np.exp(2j * np.pi * 300.0 * t), RATE_HZ, WINDOW, HOP)
        with pytest.raises(InsufficientPeriodicityError):
            dominant_period(spec.peak_trace(), spec.hop_s)

    def test_too_few_columns(self):
        """Test flash rate with fewer than eight columns."""
        spec = spectrogram(np.ones(WINDOW + 3 * HOP, dtype=complex), RATE_HZ, WINDOW, HOP)
        with pytest.raises(InsufficientDataError):
            flash_rate(spec)

    def test_dominant_period_of_sine(self):
        """Test period of a plain sinusoid."""
        dt = 1e-3
        x = np.sin(2 * np.pi * np.arange(500) * dt / 0.037)
        assert dominant_period(x, dt) == pytest.approx(0.037, rel=0.01)


if __name__ == "__main__":
    pytest.main([__file__])
