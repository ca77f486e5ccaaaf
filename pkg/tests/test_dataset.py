"""
Tests for the CFR container, ground truth files, result records and pilots.
"""

import json

import numpy as np
import pytest

from src.core.errors import (
    ConfigurationError, DataError, FormatVersionError, InsufficientDataError,
    MissingFileError, OrderingError, PayloadLengthError
)
from src.core.scenario import ScenarioConfig
from src.core.streams import CfrStream, GroundTruthRecord
from src.dsp.estimation import estimate_channel
from src.dsp.peaks import Detection
from src.sounding.dataset import CFR_FILE, GT_FILE, META_FILE, read_dataset, read_meta, write_dataset
from src.sounding.ground_truth import (
    interpolate_ground_truth, read_ground_truth_csv, sample_ground_truth, write_ground_truth_csv
)
from src.sounding.pilots import apply_pilot, pilot_entry, pilot_spectrum, zadoff_chu
from src.sounding.records import (
    read_detections, read_fixes, read_tracks, write_detections, write_fixes, write_tracks
)
from src.tracking.localization import PositionFix
from src.tracking.tracker import TrackSnapshot
from tests.benchmark.scenario_library import ScenarioLibrary

LINKS = [("tx", "rx1"), ("tx", "rx2"), ("tx", "rx3")]


def random_stream(n_snapshots=1000, n_links=3, n_subcarriers=32, seed=0):
    rng = np.random.default_rng(seed)
    shape = (n_snapshots, n_links, n_subcarriers)
    data = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)).astype(np.complex64)
    return CfrStream(data, 1000.0, LINKS[:n_links], 3e9, 50e6)


def straight_gt(n=11):
    return [GroundTruthRecord(i * 0.1, "uav", (float(i), 2.0 * i, 50.0), (10.0, 20.0, 0.0))
            for i in range(n)]


class TestContainer:
    """Test the meta.json + cfr.bin + gt.csv container."""

    def test_round_trip_bit_identical(self, tmp_path):
        """1000 snapshots on 3 links reload without any change."""
        stream = random_stream()
        gt = straight_gt()
        positions = {"tx": [0.0, 0.0, 20.0], "rx1": [1.0, 2.0, 3.0]}
        write_dataset(stream, gt, tmp_path, node_positions=positions)

        loaded, loaded_gt = read_dataset(tmp_path)
        assert loaded.data.shape == (1000, 3, 32)
        assert np.array_equal(np.asarray(loaded.data), stream.data)
        assert loaded.links == tuple(LINKS)
        assert loaded_gt == gt
        assert read_meta(tmp_path).stationary_position("rx1").tolist() == [1.0, 2.0, 3.0]

    def test_payload_size(self, tmp_path):
        """The payload holds eight bytes per complex sample."""
        write_dataset(random_stream(n_snapshots=10), [], tmp_path)
        assert (tmp_path / CFR_FILE).stat().st_size == 10 * 3 * 32 * 8

    def test_iteration(self, tmp_path):
        """Iterating yields snapshots with increasing timestamps."""
        write_dataset(random_stream(n_snapshots=5), [], tmp_path)
        loaded, _ = read_dataset(tmp_path)
        times = [s.t_s for s in loaded]
        assert times == pytest.approx([0.0, 0.001, 0.002, 0.003, 0.004])

    def test_empty_container(self, tmp_path):
        """A zero-snapshot container is valid."""
        write_dataset(random_stream(n_snapshots=0), [], tmp_path)
        loaded, gt = read_dataset(tmp_path)
        assert loaded.n_snapshots == 0
        assert gt == []

    def test_truncated_payload(self, tmp_path):
        """A short cfr.bin reports expected and actual sizes."""
        write_dataset(random_stream(n_snapshots=20), [], tmp_path)
        path = tmp_path / CFR_FILE
        data = path.read_bytes()
        path.write_bytes(data[:-5])
        with pytest.raises(PayloadLengthError) as info:
            read_dataset(tmp_path)
        assert info.value.expected == len(data)
        assert info.value.actual == len(data) - 5

    def test_wrong_version(self, tmp_path):
        """Test rejection of an unknown format version."""
        write_dataset(random_stream(n_snapshots=2), [], tmp_path)
        meta = json.loads((tmp_path / META_FILE).read_text())
        meta['format_version'] = 2
        (tmp_path / META_FILE).write_text(json.dumps(meta))
        with pytest.raises(FormatVersionError):
            read_dataset(tmp_path)

    def test_missing_files(self, tmp_path):
        """Test missing meta.json and cfr.bin."""
        with pytest.raises(MissingFileError):
            read_dataset(tmp_path)
        write_dataset(random_stream(n_snapshots=2), [], tmp_path)
        (tmp_path / CFR_FILE).unlink()
        with pytest.raises(MissingFileError):
            read_dataset(tmp_path)

    def test_missing_ground_truth(self, tmp_path):
        """A container without gt.csv loads with empty ground truth."""
        write_dataset(random_stream(n_snapshots=2), straight_gt(), tmp_path)
        (tmp_path / GT_FILE).unlink()
        _, gt = read_dataset(tmp_path)
        assert gt == []


class TestGroundTruth:
    """Test ground-truth sampling and files."""

    def test_sampling_grid(self):
        """Samples at the ground-truth rate including both ends."""
        scenario = ScenarioConfig.from_dict(ScenarioLibrary.single_target(duration_s=0.5))
        records = sample_ground_truth(scenario)
        assert len(records) == 51
        assert records[0].t_s == 0.0 and records[-1].t_s == pytest.approx(0.5)
        assert records[10].position == pytest.approx((60.5, 60.5, 40.0))
        assert records[10].velocity == pytest.approx((5.0, 5.0, 0.0))

    def test_csv_round_trip(self, tmp_path):
        """Test gt.csv write and read."""
        gt = straight_gt() + [GroundTruthRecord(0.5, "bird", (1.0, 1.0, 1.0))]
        write_ground_truth_csv(gt, tmp_path / "gt.csv")
        assert read_ground_truth_csv(tmp_path / "gt.csv") == gt

    def test_decreasing_times(self, tmp_path):
        """Per-target timestamps must not decrease."""
        gt = list(reversed(straight_gt(3)))
        write_ground_truth_csv(gt, tmp_path / "gt.csv")
        with pytest.raises(OrderingError):
            read_ground_truth_csv(tmp_path / "gt.csv")

    def test_interleaved_targets_are_ordered(self, tmp_path):
        """Ordering is checked per target, not across targets."""
        gt = [GroundTruthRecord(0.1, "a", (0, 0, 0)), GroundTruthRecord(0.0, "b", (0, 0, 0)),
              GroundTruthRecord(0.2, "a", (1, 0, 0)), GroundTruthRecord(0.1, "b", (1, 0, 0))]
        write_ground_truth_csv(gt, tmp_path / "gt.csv")
        assert len(read_ground_truth_csv(tmp_path / "gt.csv")) == 4

    def test_bad_header(self, tmp_path):
        """Test rejection of a foreign CSV."""
        (tmp_path / "gt.csv").write_text("time,x,y\n0,1,2\n")
        with pytest.raises(DataError):
            read_ground_truth_csv(tmp_path / "gt.csv")

    def test_interpolation(self):
        """Linear position between records, clamped outside."""
        gt = straight_gt()
        position, velocity = interpolate_ground_truth(gt, 0.25)
        assert position == pytest.approx([2.5, 5.0, 50.0])
        assert velocity == pytest.approx([10.0, 20.0, 0.0])
        position, _ = interpolate_ground_truth(gt, 5.0)
        assert position == pytest.approx([10.0, 20.0, 50.0])

    def test_interpolation_without_velocity(self):
        """Velocity falls back to the segment slope."""
        gt = [GroundTruthRecord(0.0, "a", (0.0, 0.0, 0.0)), GroundTruthRecord(2.0, "a", (4.0, 0.0, 0.0))]
        _, velocity = interpolate_ground_truth(gt, 1.0, "a")
        assert velocity == pytest.approx([2.0, 0.0, 0.0])

    def test_interpolation_errors(self):
        """Test empty and ambiguous ground truth."""
        with pytest.raises(InsufficientDataError):
            interpolate_ground_truth([], 0.0)
        gt = [GroundTruthRecord(0.0, "a", (0, 0, 0)), GroundTruthRecord(0.0, "b", (1, 1, 1))]
        with pytest.raises(DataError):
            interpolate_ground_truth(gt, 0.0)


class TestRecords:
    """Test detection, track and fix CSV files."""

    def test_detections_round_trip(self, tmp_path):
        """Floats survive the CSV exactly."""
        detections = [Detection(0, 0.128, 1.234567891e-6, -117.3, 24.5),
                      Detection(2, 0.256, 3.3e-7, 88.125, 13.0)]
        write_detections(detections, tmp_path / "detections.csv")
        assert read_detections(tmp_path / "detections.csv") == detections

    def test_tracks_round_trip(self, tmp_path):
        """Test tracks.csv write and read."""
        tracks = [TrackSnapshot(0.1915, 1, 1000001, "confirmed", 1e-6, -120.5)]
        write_tracks(tracks, tmp_path / "tracks.csv")
        assert read_tracks(tmp_path / "tracks.csv") == tracks

    def test_fixes_round_trip(self, tmp_path):
        """Test fixes.csv write and read."""
        fixes = [PositionFix(0.1915, (81.5, 80.25, 49.75), 0.01, 3)]
        write_fixes(fixes, tmp_path / "fixes.csv")
        assert read_fixes(tmp_path / "fixes.csv") == fixes

    def test_header_checked(self, tmp_path):
        """A file with another header is rejected."""
        (tmp_path / "d.csv").write_text("a,b\n1,2\n")
        with pytest.raises(DataError):
            read_detections(tmp_path / "d.csv")

    def test_malformed_row(self, tmp_path):
        """Test a row that does not parse."""
        (tmp_path / "d.csv").write_text("cpi_start_s,link,delay_s,doppler_hz,snr_db\n0.1,x,1,2,3\n")
        with pytest.raises(DataError):
            read_detections(tmp_path / "d.csv")

    def test_missing(self, tmp_path):
        """Test a missing records file."""
        with pytest.raises(MissingFileError):
            read_tracks(tmp_path / "tracks.csv")


class TestPilots:
    """Test pilot spectra and channel estimation."""

    def test_zadoff_chu_constant_modulus(self):
        """Zadoff-Chu symbols all have unit magnitude."""
        assert np.allclose(np.abs(zadoff_chu(64)), 1.0)
        assert np.allclose(np.abs(zadoff_chu(63, root=5)), 1.0)

    def test_zadoff_chu_root_must_be_coprime(self):
        """Test rejection of a root sharing a factor with the length."""
        with pytest.raises(ConfigurationError):
            zadoff_chu(64, root=4)

    def test_pilot_entries(self):
        """Unit pilots need no meta entry."""
        assert pilot_entry("unit") is None
        entry = pilot_entry("zadoff-chu")
        assert np.array_equal(pilot_spectrum(entry, 32), zadoff_chu(32))
        assert np.array_equal(pilot_spectrum(None, 8), np.ones(8))
        with pytest.raises(ConfigurationError):
            pilot_spectrum({'kind': 'chirp'}, 8)

    def test_division_recovers_channel(self):
        """rx / pilot gives back the channel."""
        stream = random_stream(n_snapshots=4, n_subcarriers=64)
        pilot = zadoff_chu(64)
        received = apply_pilot(stream, pilot)
        estimate, valid = estimate_channel(received.data, pilot)
        assert valid.all()
        assert np.allclose(estimate, stream.data, atol=1e-5)

    def test_null_subcarriers_masked(self):
        """Subcarriers with a near-zero pilot are set to zero."""
        pilot = np.ones(8, dtype=complex)
        pilot[3] = 1e-9
        estimate, valid = estimate_channel(np.full(8, 2.0 + 0j), pilot)
        assert not valid[3] and valid.sum() == 7
        assert estimate[3] == 0
        assert np.allclose(np.delete(estimate, 3), 2.0)

    def test_all_zero_pilot(self):
        """Test error for a pilot without energy."""
        with pytest.raises(DataError):
            estimate_channel(np.ones(4), np.zeros(4))


if __name__ == "__main__":
    pytest.main([__file__])
